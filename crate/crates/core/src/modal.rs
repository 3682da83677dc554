//! Mode-shape algebra, multi-setup merging, long-term mode tracking,
//! modal statistics and environmental correlation.

use chrono::{DateTime, Utc};
use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::ssi::ModeEstimate;
use crate::{Error, Result};

/// Modal assurance criterion: |aᴴb|² / (‖a‖²‖b‖²) in [0, 1].
pub fn mac(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Parameter(format!(
            "shape lengths differ or empty: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x.conj() * y;
        na += x.norm_sqr();
        nb += y.norm_sqr();
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Parameter("zero-norm shape".into()));
    }
    Ok((dot.norm_sqr() / (na * nb)).min(1.0))
}

/// A mode-shape fragment measured in one sensor layout, keyed by channel id.
pub type ShapeFragment = BTreeMap<String, Complex64>;

/// Merges shape fragments from multiple sensor layouts that share reference
/// channels into one global shape.
///
/// Each setup is scaled by the least-squares complex factor aligning its
/// reference partition to the first setup; entries seen in several setups
/// are averaged; the result is normalized to unit maximum modulus.
pub fn merge_setups(
    setups: &[ShapeFragment],
    reference_channels: &[String],
) -> Result<BTreeMap<String, Complex64>> {
    if setups.is_empty() {
        return Err(Error::Parameter("no setups".into()));
    }
    if reference_channels.is_empty() {
        return Err(Error::Config("no reference channels given".into()));
    }
    for (s, setup) in setups.iter().enumerate() {
        for r in reference_channels {
            if !setup.contains_key(r) {
                return Err(Error::Config(format!(
                    "setup {s} is missing reference channel {r:?}"
                )));
            }
        }
    }
    let anchor = &setups[0];
    let mut sums: BTreeMap<String, (Complex64, usize)> = BTreeMap::new();
    for setup in setups {
        // α = (x_refᴴ a_ref) / (x_refᴴ x_ref) minimizes ‖α·x_ref − a_ref‖.
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for r in reference_channels {
            let x = setup[r];
            num += x.conj() * anchor[r];
            den += x.norm_sqr();
        }
        if den == 0.0 {
            return Err(Error::Parameter("reference partition has zero norm".into()));
        }
        let alpha = num / den;
        for (ch, &v) in setup {
            let e = sums.entry(ch.clone()).or_insert((Complex64::new(0.0, 0.0), 0));
            e.0 += alpha * v;
            e.1 += 1;
        }
    }
    let mut merged: BTreeMap<String, Complex64> = sums
        .into_iter()
        .map(|(ch, (sum, count))| (ch, sum / count as f64))
        .collect();
    // Normalize to unit maximum modulus with a real positive pivot.
    let pivot = merged
        .values()
        .copied()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        return Err(Error::Parameter("merged shape is zero".into()));
    }
    for v in merged.values_mut() {
        *v /= pivot;
    }
    Ok(merged)
}

/// Environmental observable kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    TemperatureC,
    WindSpeedMs,
}

/// A sparse, time-sorted environmental series.
#[derive(Debug, Clone)]
pub struct EnvSeries {
    pub kind: EnvKind,
    pub samples: Vec<(DateTime<Utc>, f64)>,
}

impl EnvSeries {
    pub fn new(kind: EnvKind, samples: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Parameter("environmental series not time-sorted".into()));
        }
        for &(t, v) in &samples {
            match kind {
                EnvKind::TemperatureC if !(-30.0..=50.0).contains(&v) => {
                    return Err(Error::Parameter(format!(
                        "implausible temperature {v} °C at {t}"
                    )));
                }
                EnvKind::WindSpeedMs if v < 0.0 => {
                    return Err(Error::Parameter(format!("negative wind speed {v} at {t}")));
                }
                _ => {}
            }
        }
        Ok(Self { kind, samples })
    }

    pub fn temperature(samples: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        Self::new(EnvKind::TemperatureC, samples)
    }

    pub fn wind(samples: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        Self::new(EnvKind::WindSpeedMs, samples)
    }

    /// Nearest sample within `tolerance_s` seconds of `t`.
    pub fn nearest(&self, t: DateTime<Utc>, tolerance_s: i64) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self.samples.partition_point(|&(st, _)| st < t);
        let mut best: Option<(i64, f64)> = None;
        for j in [idx.wrapping_sub(1), idx] {
            if let Some(&(st, v)) = self.samples.get(j) {
                let d = (st - t).num_seconds().abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, v));
                }
            }
        }
        best.and_then(|(d, v)| (d <= tolerance_s).then_some(v))
    }

    /// Linear interpolation (used by the simulator drift law).
    pub fn interpolate(&self, t: DateTime<Utc>) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() {
            return None;
        }
        if t <= s[0].0 {
            return Some(s[0].1);
        }
        if t >= s[s.len() - 1].0 {
            return Some(s[s.len() - 1].1);
        }
        let idx = s.partition_point(|&(st, _)| st <= t);
        let (t0, v0) = s[idx - 1];
        let (t1, v1) = s[idx];
        let span = (t1 - t0).num_milliseconds() as f64;
        if span <= 0.0 {
            return Some(v0);
        }
        let frac = (t - t0).num_milliseconds() as f64 / span;
        Some(v0 + frac * (v1 - v0))
    }
}

/// A baseline mode the tracker locks onto.
#[derive(Debug, Clone)]
pub struct BaselineMode {
    pub label: String,
    pub freq_hz: f64,
    /// Optional reference shape; when present the MAC gate applies.
    pub shape: Option<Vec<Complex64>>,
}

/// Values of a tracked mode in one window.
#[derive(Debug, Clone)]
pub struct TrackedPoint {
    pub freq_hz: f64,
    pub damping: f64,
    pub shape: Vec<Complex64>,
}

/// One window of a trajectory; `value` is `None` when the mode was not
/// detected in that window.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub window_start: DateTime<Utc>,
    pub value: Option<TrackedPoint>,
}

/// One physical mode followed across campaign windows, with gaps.
#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub label: String,
    pub points: Vec<TrajectoryPoint>,
}

impl ModeTrajectory {
    pub fn detection_rate(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().filter(|p| p.value.is_some()).count() as f64 / self.points.len() as f64
    }

    pub fn detected_freqs(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter_map(|p| p.value.as_ref().map(|v| v.freq_hz))
            .collect()
    }

    pub fn detected_dampings(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter_map(|p| p.value.as_ref().map(|v| v.damping))
            .collect()
    }
}

/// Assigns per-window mode estimates to baseline modes.
///
/// A candidate pairing must satisfy |Δf|/f_baseline < f_tol and, when both
/// shapes are available, MAC > mac_min; pairings are resolved one-to-one in
/// ascending frequency-distance order. Windows where a baseline mode finds
/// no estimate get an undetected point.
pub fn track_modes(
    estimates: &[(DateTime<Utc>, Vec<ModeEstimate>)],
    baseline: &[BaselineMode],
    f_tol: f64,
    mac_min: f64,
) -> Result<Vec<ModeTrajectory>> {
    for (i, a) in baseline.iter().enumerate() {
        for b in baseline.iter().skip(i + 1) {
            let sep = (a.freq_hz - b.freq_hz).abs() / a.freq_hz.min(b.freq_hz);
            if sep <= 2.0 * f_tol {
                return Err(Error::Config(format!(
                    "baseline modes {:?} and {:?} are closer than twice the tolerance",
                    a.label, b.label
                )));
            }
        }
    }
    let mut trajectories: Vec<ModeTrajectory> = baseline
        .iter()
        .map(|b| ModeTrajectory {
            label: b.label.clone(),
            points: Vec::with_capacity(estimates.len()),
        })
        .collect();

    for (window_start, window_estimates) in estimates {
        // Candidate (distance, estimate, baseline) triples that pass gates.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (e_idx, est) in window_estimates.iter().enumerate() {
            for (b_idx, base) in baseline.iter().enumerate() {
                let rel = (est.freq_hz - base.freq_hz).abs() / base.freq_hz;
                if rel >= f_tol {
                    continue;
                }
                if let Some(ref base_shape) = base.shape {
                    if !est.shape.is_empty() {
                        match mac(&est.shape, base_shape) {
                            Ok(v) if v > mac_min => {}
                            _ => continue,
                        }
                    }
                }
                candidates.push((rel, e_idx, b_idx));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut est_used = vec![false; window_estimates.len()];
        let mut base_used = vec![false; baseline.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; baseline.len()];
        for (_, e_idx, b_idx) in candidates {
            if !est_used[e_idx] && !base_used[b_idx] {
                est_used[e_idx] = true;
                base_used[b_idx] = true;
                assigned[b_idx] = Some(e_idx);
            }
        }
        for (b_idx, traj) in trajectories.iter_mut().enumerate() {
            let value = assigned[b_idx].map(|e_idx| {
                let est = &window_estimates[e_idx];
                TrackedPoint {
                    freq_hz: est.freq_hz,
                    damping: est.damping,
                    shape: est.shape.clone(),
                }
            });
            traj.points.push(TrajectoryPoint {
                window_start: *window_start,
                value,
            });
        }
    }
    Ok(trajectories)
}

/// Campaign statistics of one trajectory.
#[derive(Debug, Clone)]
pub struct ModeStatistics {
    pub mean_f_hz: f64,
    /// |p_high − p_low| / p_low × 100 over the frequency percentiles.
    pub delta_f_pct: f64,
    /// Mean damping, percent of critical.
    pub mean_xi_pct: f64,
    pub delta_xi_pct: f64,
    pub detection_rate: f64,
}

/// Percentile by linear interpolation on the sorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

fn delta_pct(values: &[f64], p_lo: f64, p_hi: f64) -> f64 {
    let lo = percentile(values, p_lo);
    let hi = percentile(values, p_hi);
    (hi - lo).abs() / lo.abs() * 100.0
}

/// Mean and percentile-spread statistics over the detected points.
pub fn mode_statistics(
    traj: &ModeTrajectory,
    f_percentiles: (f64, f64),
    xi_percentiles: (f64, f64),
) -> Result<ModeStatistics> {
    let freqs = traj.detected_freqs();
    let xis = traj.detected_dampings();
    if freqs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "trajectory {:?} has {} detected points",
            traj.label,
            freqs.len()
        )));
    }
    Ok(ModeStatistics {
        mean_f_hz: freqs.iter().sum::<f64>() / freqs.len() as f64,
        delta_f_pct: delta_pct(&freqs, f_percentiles.0, f_percentiles.1),
        mean_xi_pct: xis.iter().sum::<f64>() / xis.len() as f64 * 100.0,
        delta_xi_pct: delta_pct(&xis, xi_percentiles.0, xi_percentiles.1),
        detection_rate: traj.detection_rate(),
    })
}

/// Result of correlating a trajectory against an environmental series.
#[derive(Debug, Clone)]
pub struct EnvCorrelation {
    /// Pearson r at zero lag.
    pub r0: f64,
    /// Lag (in window steps, i.e. hours on the hourly grid) maximizing r;
    /// positive means the trajectory follows the environment.
    pub best_lag: i64,
    pub r_at_best: f64,
    /// (r for env < split, r for env ≥ split) when a regime split was given.
    pub per_regime: Option<(f64, f64)>,
    pub n_pairs: usize,
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    if pairs.len() < 3 {
        return f64::NAN;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlates a mode trajectory with an environmental series resampled to
/// the window grid by nearest neighbor (within 30 minutes).
///
/// Requires at least 48 overlapping windows. `best_lag` maximizes the
/// cross-correlation r(lag) = corr(traj[k], env[k − lag]) over ±`max_lag`.
pub fn correlate_env(
    traj: &ModeTrajectory,
    env: &EnvSeries,
    max_lag: i64,
    regime_split: Option<f64>,
) -> Result<EnvCorrelation> {
    // Per-window pairs on the trajectory grid.
    let grid: Vec<(Option<f64>, Option<f64>)> = traj
        .points
        .iter()
        .map(|p| {
            let f = p.value.as_ref().map(|v| v.freq_hz);
            let e = env.nearest(p.window_start, 30 * 60);
            (f, e)
        })
        .collect();
    let paired: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|&(f, e)| f.zip(e))
        .collect();
    if paired.len() < 48 {
        return Err(Error::InsufficientData(format!(
            "only {} overlapping windows (need 48)",
            paired.len()
        )));
    }
    let r0 = pearson(&paired);

    let mut best_lag = 0i64;
    let mut r_at_best = f64::NEG_INFINITY;
    for lag in -max_lag..=max_lag {
        let mut pairs = Vec::new();
        for (k, &(f, _)) in grid.iter().enumerate() {
            let j = k as i64 - lag;
            if j < 0 || j as usize >= grid.len() {
                continue;
            }
            if let (Some(fv), Some(ev)) = (f, grid[j as usize].1) {
                pairs.push((fv, ev));
            }
        }
        let r = pearson(&pairs);
        if r.is_finite() && r > r_at_best {
            r_at_best = r;
            best_lag = lag;
        }
    }

    let per_regime = regime_split.map(|split| {
        let below: Vec<(f64, f64)> = paired.iter().copied().filter(|&(_, e)| e < split).collect();
        let above: Vec<(f64, f64)> = paired.iter().copied().filter(|&(_, e)| e >= split).collect();
        (pearson(&below), pearson(&above))
    });

    Ok(EnvCorrelation {
        r0,
        best_lag,
        r_at_best,
        per_regime,
        n_pairs: paired.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 11, 18, 0, 0, 0).unwrap()
    }

    #[test]
    fn mac_identity_orthogonal_scale() {
        let v = vec![c(1.0, 0.2), c(-0.5, 0.0), c(0.3, -0.7)];
        assert!((mac(&v, &v).unwrap() - 1.0).abs() < 1e-15);

        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let e2 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(mac(&e1, &e2).unwrap(), 0.0);

        let scaled: Vec<Complex64> = v.iter().map(|x| x * c(-2.3, 1.7)).collect();
        assert!((mac(&v, &scaled).unwrap() - 1.0).abs() < 1e-12);

        assert!(mac(&[], &[]).is_err());
        assert!(mac(&[c(0.0, 0.0)], &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn merge_two_overlapping_setups_exact() {
        // Global truth over six channels.
        let truth: Vec<(&str, Complex64)> = vec![
            ("a", c(0.2, 0.1)),
            ("b", c(-0.7, 0.3)),
            ("c", c(1.0, 0.0)),
            ("d", c(0.4, -0.8)),
            ("e", c(-0.1, -0.2)),
            ("f", c(0.6, 0.6)),
        ];
        let pick = |keys: &[&str], scale: Complex64| -> ShapeFragment {
            truth
                .iter()
                .filter(|(k, _)| keys.contains(k))
                .map(|(k, v)| (k.to_string(), v * scale))
                .collect()
        };
        let setup1 = pick(&["a", "b", "c", "d"], c(1.0, 0.0));
        let setup2 = pick(&["c", "d", "e", "f"], c(-0.4, 2.1));
        let refs = vec!["c".to_string(), "d".to_string()];
        let merged = merge_setups(&[setup1, setup2], &refs).unwrap();
        assert_eq!(merged.len(), 6);
        let got: Vec<Complex64> = truth.iter().map(|(k, _)| merged[*k]).collect();
        let want: Vec<Complex64> = truth.iter().map(|(_, v)| *v).collect();
        assert!(mac(&got, &want).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn merge_single_setup_normalizes_only() {
        let setup: ShapeFragment = [
            ("a".to_string(), c(0.0, 2.0)),
            ("b".to_string(), c(1.0, 0.0)),
        ]
        .into_iter()
        .collect();
        let merged = merge_setups(std::slice::from_ref(&setup), &["a".to_string()]).unwrap();
        // Max-modulus entry becomes exactly 1.
        assert!((merged["a"] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((merged["b"] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn merge_with_noise_keeps_high_mac() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut unif = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        let truth: Vec<(String, Complex64)> = (0..8)
            .map(|k| (format!("ch{k}"), c(unif() * 2.0, unif() * 2.0)))
            .collect();
        for _trial in 0..25 {
            let mut noisy = |keys: std::ops::Range<usize>, scale: Complex64| -> ShapeFragment {
                truth[keys]
                    .iter()
                    .map(|(k, v)| {
                        let noise = c(unif() * 0.05 * 2.0, unif() * 0.05 * 2.0) * v.norm();
                        (k.clone(), v * scale + noise)
                    })
                    .collect()
            };
            let s1 = noisy(0..5, c(1.0, 0.0));
            let s2 = noisy(3..8, c(0.3, -1.2));
            let refs = vec!["ch3".to_string(), "ch4".to_string()];
            let merged = merge_setups(&[s1, s2], &refs).unwrap();
            let got: Vec<Complex64> = truth.iter().map(|(k, _)| merged[k]).collect();
            let want: Vec<Complex64> = truth.iter().map(|(_, v)| *v).collect();
            let m = mac(&got, &want).unwrap();
            assert!(m >= 0.99, "MAC {m} below 0.99");
        }
    }

    #[test]
    fn merge_missing_reference_is_config_error() {
        let s1: ShapeFragment = [("a".to_string(), c(1.0, 0.0))].into_iter().collect();
        let s2: ShapeFragment = [("b".to_string(), c(1.0, 0.0))].into_iter().collect();
        assert!(matches!(
            merge_setups(&[s1, s2], &["a".to_string()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn merge_anchor_choice_is_immaterial() {
        let truth: Vec<(&str, Complex64)> =
            vec![("a", c(0.9, -0.3)), ("b", c(-0.2, 0.5)), ("c", c(1.0, 0.0)), ("d", c(0.1, 0.8))];
        let frag = |keys: &[&str], scale: Complex64| -> ShapeFragment {
            truth
                .iter()
                .filter(|(k, _)| keys.contains(k))
                .map(|(k, v)| (k.to_string(), v * scale))
                .collect()
        };
        let s1 = frag(&["a", "b", "c"], c(2.0, 0.4));
        let s2 = frag(&["b", "c", "d"], c(-0.6, 1.1));
        let refs = vec!["b".to_string(), "c".to_string()];
        let m12 = merge_setups(&[s1.clone(), s2.clone()], &refs).unwrap();
        let m21 = merge_setups(&[s2, s1], &refs).unwrap();
        let v12: Vec<Complex64> = m12.values().copied().collect();
        let v21: Vec<Complex64> = m21.values().copied().collect();
        assert!(mac(&v12, &v21).unwrap() > 1.0 - 1e-12);
    }

    fn estimate(f: f64, xi: f64) -> ModeEstimate {
        ModeEstimate {
            freq_hz: f,
            damping: xi,
            shape: vec![c(1.0, 0.0), c(0.5, 0.0)],
            order: 10,
            cluster_size: 8,
            window_start: None,
        }
    }

    fn baseline_two() -> Vec<BaselineMode> {
        vec![
            BaselineMode { label: "f1".into(), freq_hz: 1.0, shape: None },
            BaselineMode { label: "f2".into(), freq_hz: 1.3, shape: None },
        ]
    }

    #[test]
    fn tracking_constant_modes_full_detection() {
        let windows: Vec<(DateTime<Utc>, Vec<ModeEstimate>)> = (0..100)
            .map(|h| {
                (
                    t0() + Duration::hours(h),
                    vec![estimate(1.001, 0.01), estimate(1.295, 0.012)],
                )
            })
            .collect();
        let trajs = track_modes(&windows, &baseline_two(), 0.05, 0.8).unwrap();
        assert_eq!(trajs.len(), 2);
        for t in &trajs {
            assert_eq!(t.detection_rate(), 1.0);
        }
    }

    #[test]
    fn tracking_intermittent_mode_rate() {
        // Second mode present in 30% of the windows.
        let windows: Vec<(DateTime<Utc>, Vec<ModeEstimate>)> = (0..200)
            .map(|h| {
                let mut v = vec![estimate(1.0, 0.01)];
                if h % 10 < 3 {
                    v.push(estimate(1.3, 0.015));
                }
                (t0() + Duration::hours(h), v)
            })
            .collect();
        let trajs = track_modes(&windows, &baseline_two(), 0.05, 0.8).unwrap();
        assert_eq!(trajs[0].detection_rate(), 1.0);
        assert!((trajs[1].detection_rate() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tracking_never_double_assigns() {
        // Two estimates both near f1; only one may land there.
        let windows = vec![(
            t0(),
            vec![estimate(0.999, 0.01), estimate(1.001, 0.01)],
        )];
        let trajs = track_modes(&windows, &baseline_two(), 0.05, 0.8).unwrap();
        let detected: usize = trajs
            .iter()
            .map(|t| t.points.iter().filter(|p| p.value.is_some()).count())
            .sum();
        assert_eq!(detected, 1);
    }

    #[test]
    fn tracking_rejects_overlapping_baseline() {
        let baseline = vec![
            BaselineMode { label: "a".into(), freq_hz: 1.00, shape: None },
            BaselineMode { label: "b".into(), freq_hz: 1.05, shape: None },
        ];
        assert!(track_modes(&[], &baseline, 0.05, 0.8).is_err());
    }

    #[test]
    fn statistics_constant_series() {
        let traj = ModeTrajectory {
            label: "f1".into(),
            points: (0..50)
                .map(|h| TrajectoryPoint {
                    window_start: t0() + Duration::hours(h),
                    value: Some(TrackedPoint { freq_hz: 2.0, damping: 0.01, shape: vec![] }),
                })
                .collect(),
        };
        let s = mode_statistics(&traj, (1.0, 99.0), (5.0, 95.0)).unwrap();
        assert_eq!(s.delta_f_pct, 0.0);
        assert_eq!(s.delta_xi_pct, 0.0);
        assert_eq!(s.mean_f_hz, 2.0);
        assert_eq!(s.detection_rate, 1.0);
    }

    #[test]
    fn statistics_match_brute_force_percentile_oracle() {
        // Independent oracle: sort and interpolate positions directly.
        let values: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        let oracle = |p: f64| -> f64 {
            let mut v = values.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let pos = p / 100.0 * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if lo + 1 < v.len() {
                v[lo] * (1.0 - frac) + v[lo + 1] * frac
            } else {
                v[lo]
            }
        };
        let expected = (oracle(99.0) - oracle(1.0)).abs() / oracle(1.0) * 100.0;

        let traj = ModeTrajectory {
            label: "x".into(),
            points: values
                .iter()
                .enumerate()
                .map(|(h, &f)| TrajectoryPoint {
                    window_start: t0() + Duration::hours(h as i64),
                    value: Some(TrackedPoint { freq_hz: f, damping: f / 100.0, shape: vec![] }),
                })
                .collect(),
        };
        let s = mode_statistics(&traj, (1.0, 99.0), (5.0, 95.0)).unwrap();
        assert!((s.delta_f_pct - expected).abs() < 1e-12);
    }

    #[test]
    fn statistics_insufficient_data() {
        let traj = ModeTrajectory {
            label: "x".into(),
            points: vec![TrajectoryPoint {
                window_start: t0(),
                value: Some(TrackedPoint { freq_hz: 1.0, damping: 0.01, shape: vec![] }),
            }],
        };
        assert!(matches!(
            mode_statistics(&traj, (1.0, 99.0), (5.0, 95.0)),
            Err(Error::InsufficientData(_))
        ));
    }

    fn hourly_env(values: &[f64]) -> EnvSeries {
        EnvSeries::temperature(
            values
                .iter()
                .enumerate()
                .map(|(h, &v)| (t0() + Duration::hours(h as i64), v))
                .collect(),
        )
        .unwrap()
    }

    fn traj_from(values: &[f64]) -> ModeTrajectory {
        ModeTrajectory {
            label: "f1".into(),
            points: values
                .iter()
                .enumerate()
                .map(|(h, &f)| TrajectoryPoint {
                    window_start: t0() + Duration::hours(h as i64),
                    value: Some(TrackedPoint { freq_hz: f, damping: 0.01, shape: vec![] }),
                })
                .collect(),
        }
    }

    #[test]
    fn correlation_affine_function() {
        let env_vals: Vec<f64> = (0..100)
            .map(|h| 10.0 + 8.0 * (h as f64 / 24.0 * std::f64::consts::TAU).sin())
            .collect();
        let traj_vals: Vec<f64> = env_vals.iter().map(|t| 1.0 + 0.001 * t).collect();
        let r = correlate_env(&traj_from(&traj_vals), &hourly_env(&env_vals), 8, None).unwrap();
        assert!((r.r0 - 1.0).abs() < 1e-9);
        assert_eq!(r.best_lag, 0);
    }

    #[test]
    fn correlation_recovers_four_hour_delay() {
        let env_vals: Vec<f64> = (0..200)
            .map(|h| 10.0 + 8.0 * (h as f64 / 24.0 * std::f64::consts::TAU).sin())
            .collect();
        // Trajectory follows the environment 4 hours later.
        let traj_vals: Vec<f64> = (0..200)
            .map(|h| {
                let t = (h as f64 - 4.0) / 24.0 * std::f64::consts::TAU;
                1.0 + 0.001 * (10.0 + 8.0 * t.sin())
            })
            .collect();
        let r = correlate_env(&traj_from(&traj_vals), &hourly_env(&env_vals), 12, None).unwrap();
        assert!((r.best_lag - 4).abs() <= 1, "best lag {}", r.best_lag);
    }

    #[test]
    fn correlation_v_shaped_regimes() {
        // Temperature sweeps −10..+10 °C; response rises away from zero in
        // both directions (V shape).
        let env_vals: Vec<f64> = (0..120).map(|h| -10.0 + (h as f64) / 6.0).collect();
        let traj_vals: Vec<f64> = env_vals
            .iter()
            .map(|&t| if t >= 0.0 { 1.0 + 0.002 * t } else { 1.0 - 0.002 * t })
            .collect();
        let r = correlate_env(
            &traj_from(&traj_vals),
            &hourly_env(&env_vals),
            6,
            Some(0.0),
        )
        .unwrap();
        let (below, above) = r.per_regime.unwrap();
        assert!(below < -0.5, "below-zero r = {below}");
        assert!(above > 0.5, "above-zero r = {above}");
    }

    #[test]
    fn correlation_insufficient_overlap() {
        let env_vals = vec![1.0; 10];
        let traj_vals = vec![1.0; 10];
        assert!(matches!(
            correlate_env(&traj_from(&traj_vals), &hourly_env(&env_vals), 4, None),
            Err(Error::InsufficientData(_))
        ));
    }
}
