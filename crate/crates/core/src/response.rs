//! Vibration-level statistics, earthquake/teleseism detection with catalog
//! matching, and low-frequency tilt/twist estimation.

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use std::collections::BTreeMap;

use crate::data::{CatalogEntry, MultiChannelRecord, TimeSeriesSegment, Unit};
use crate::dsp::{design_butterworth, FilterKind};
use crate::{Error, Result};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Catalog matching window for teleseisms (propagation delay), minutes.
pub const DEFAULT_TELESEISM_WINDOW_MIN: f64 = 30.0;
/// Catalog matching window for regional events, minutes.
pub const DEFAULT_REGIONAL_WINDOW_MIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelGranularity {
    HourlyMax,
    DailyAvgOfHourlyMax,
}

#[derive(Debug, Clone)]
pub struct LevelPoint {
    pub time: DateTime<Utc>,
    pub value: f64,
    /// Set on daily points built from fewer than 12 valid hours.
    pub flagged: bool,
}

/// Per-channel vibration level series.
#[derive(Debug, Clone)]
pub struct LevelSeries {
    pub granularity: LevelGranularity,
    /// (channel label, time-sorted points).
    pub channels: Vec<(String, Vec<LevelPoint>)>,
}

/// Maximum absolute value per clock hour and channel.
/// Requires acceleration units (m/s² or g).
pub fn hourly_max_abs(record: &MultiChannelRecord) -> Result<LevelSeries> {
    let mut channels = Vec::with_capacity(record.channels.len());
    for ch in &record.channels {
        let mut hours: BTreeMap<i64, f64> = BTreeMap::new();
        for seg in &ch.segments {
            if !matches!(seg.unit, Unit::MetersPerSecond2 | Unit::G) {
                return Err(Error::InvalidState(format!(
                    "channel {} is in {}, not acceleration",
                    ch.meta.label(),
                    seg.unit
                )));
            }
            for (k, &v) in seg.samples.iter().enumerate() {
                let hour = seg.time_at(k).timestamp().div_euclid(3600);
                let e = hours.entry(hour).or_insert(0.0);
                *e = e.max(v.abs());
            }
        }
        let points = hours
            .into_iter()
            .map(|(h, value)| LevelPoint {
                time: Utc.timestamp_opt(h * 3600, 0).unwrap(),
                value,
                flagged: false,
            })
            .collect();
        channels.push((ch.meta.label(), points));
    }
    Ok(LevelSeries {
        granularity: LevelGranularity::HourlyMax,
        channels,
    })
}

/// Arithmetic mean of each UTC day's hourly maxima. Days with fewer than
/// 12 valid hours are flagged but still reported.
pub fn daily_avg_hourly_max(levels: &LevelSeries) -> Result<LevelSeries> {
    if levels.granularity != LevelGranularity::HourlyMax {
        return Err(Error::Parameter("input must be hourly maxima".into()));
    }
    let mut channels = Vec::with_capacity(levels.channels.len());
    for (label, points) in &levels.channels {
        let mut days: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
        for p in points {
            let day = p.time.num_days_from_ce();
            let e = days.entry(day).or_insert((0.0, 0));
            e.0 += p.value;
            e.1 += 1;
        }
        let out: Vec<LevelPoint> = days
            .into_iter()
            .map(|(day, (sum, count))| {
                let date = chrono::NaiveDate::from_num_days_from_ce_opt(day).unwrap();
                LevelPoint {
                    time: date.and_hms_opt(0, 0, 0).unwrap().and_utc(),
                    value: sum / count as f64,
                    flagged: count < 12,
                }
            })
            .collect();
        channels.push((label.clone(), out));
    }
    Ok(LevelSeries {
        granularity: LevelGranularity::DailyAvgOfHourlyMax,
        channels,
    })
}

/// One detected transient.
#[derive(Debug, Clone)]
pub struct DetectionEvent {
    pub trigger_time: DateTime<Utc>,
    pub duration_s: f64,
    /// Maximum absolute (band-limited) amplitude inside the event.
    pub peak_value: f64,
    /// Analysis band, Hz.
    pub band_hz: (f64, f64),
    pub matched_catalog: Option<CatalogEntry>,
}

/// Classic STA/LTA trigger on squared samples with running means. The LTA
/// is frozen while the trigger is open so a long event cannot silence
/// itself; it reopens once the ratio falls to `off`.
pub fn sta_lta_detect(
    x: &TimeSeriesSegment,
    sta_s: f64,
    lta_s: f64,
    on: f64,
    off: f64,
) -> Result<Vec<DetectionEvent>> {
    if !(sta_s > 0.0 && lta_s > sta_s) {
        return Err(Error::Parameter(format!(
            "need lta {lta_s} > sta {sta_s} > 0"
        )));
    }
    if !(off > 1.0 && on > off) {
        return Err(Error::Parameter(format!("need on {on} > off {off} > 1")));
    }
    let ns = ((sta_s * x.rate).round() as usize).max(1);
    let nl = ((lta_s * x.rate).round() as usize).max(ns + 1);
    let n = x.samples.len();
    if n <= nl {
        return Ok(Vec::new());
    }
    // Prefix sums of the squared signal.
    let mut prefix = vec![0.0f64; n + 1];
    for (k, &v) in x.samples.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v * v;
    }
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;

    let mut events = Vec::new();
    let mut open: Option<(usize, f64)> = None; // (start index, frozen LTA)
    for k in (nl - 1)..n {
        let sta = mean(k + 1 - ns, k + 1);
        let lta = match open {
            Some((_, frozen)) => frozen,
            None => mean(k + 1 - nl, k + 1),
        };
        let ratio = if lta > 0.0 { sta / lta } else { 0.0 };
        match open {
            None if ratio >= on => open = Some((k, lta)),
            Some((k_on, _)) if ratio <= off => {
                events.push(close_event(x, k_on, k));
                open = None;
            }
            _ => {}
        }
    }
    if let Some((k_on, _)) = open {
        events.push(close_event(x, k_on, n - 1));
    }
    Ok(events)
}

fn close_event(x: &TimeSeriesSegment, k_on: usize, k_off: usize) -> DetectionEvent {
    let peak = x.samples[k_on..=k_off]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    DetectionEvent {
        trigger_time: x.time_at(k_on),
        duration_s: ((k_off - k_on).max(1)) as f64 / x.rate,
        peak_value: peak,
        band_hz: (0.0, x.rate / 2.0),
        matched_catalog: None,
    }
}

/// Teleseism scan parameters.
#[derive(Debug, Clone, Copy)]
pub struct TeleseismConfig {
    /// Band-pass corners, Hz.
    pub band_hz: (f64, f64),
    /// Moving-RMS envelope window, seconds.
    pub envelope_s: f64,
    /// Threshold as a multiple of the median envelope.
    pub threshold_k: f64,
    /// Events closer than this are merged, seconds.
    pub merge_gap_s: f64,
    /// Cosine edge taper applied before filtering, seconds per side.
    pub taper_s: f64,
    /// Exceedances confined to this many seconds at either end are edge
    /// artifacts of the taper/filter startup and are dropped.
    pub edge_guard_s: f64,
}

impl Default for TeleseismConfig {
    fn default() -> Self {
        Self {
            band_hz: (0.04, 1.0),
            envelope_s: 60.0,
            threshold_k: 5.0,
            merge_gap_s: 600.0,
            taper_s: 120.0,
            edge_guard_s: 240.0,
        }
    }
}

/// Long-period event scan: zero-phase band-pass, moving-RMS envelope,
/// threshold at a multiple of the median envelope (robust against the very
/// transients being detected), nearby exceedances merged. Segment ends are
/// cosine-tapered so edge discontinuities cannot ring through the very
/// narrow low corner.
pub fn teleseism_scan(x: &TimeSeriesSegment, config: &TeleseismConfig) -> Result<Vec<DetectionEvent>> {
    if x.rate < 2.5 {
        return Err(Error::Parameter(format!(
            "rate {} too low for a {} Hz upper corner",
            x.rate, config.band_hz.1
        )));
    }
    let sos = design_butterworth(
        FilterKind::Bandpass(config.band_hz.0, config.band_hz.1),
        4,
        x.rate,
    )?;
    let mut tapered = x.samples.clone();
    let taper = ((config.taper_s * x.rate) as usize).min(tapered.len() / 2);
    for k in 0..taper {
        let w = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / taper as f64).cos());
        tapered[k] *= w;
        let last = tapered.len() - 1 - k;
        tapered[last] *= w;
    }
    let filtered = sos.filtfilt(&tapered);
    let n = filtered.len();
    let half = ((config.envelope_s * x.rate / 2.0).round() as usize).max(1);
    let mut prefix = vec![0.0f64; n + 1];
    for (k, &v) in filtered.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v * v;
    }
    let envelope: Vec<f64> = (0..n)
        .map(|k| {
            let a = k.saturating_sub(half);
            let b = (k + half + 1).min(n);
            ((prefix[b] - prefix[a]) / (b - a) as f64).sqrt()
        })
        .collect();
    let mut sorted = envelope.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[n / 2];
    let threshold = config.threshold_k * median;
    if threshold <= 0.0 {
        return Ok(Vec::new());
    }

    // Runs above threshold, merged across short gaps.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..n {
        match (envelope[k] > threshold, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, n - 1));
    }
    let merge_gap = (config.merge_gap_s * x.rate) as usize;
    let guard = (config.edge_guard_s * x.rate) as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs {
        if e < guard || s + guard >= n {
            continue;
        }
        match merged.last_mut() {
            Some(last) if s.saturating_sub(last.1) < merge_gap => last.1 = e,
            _ => merged.push((s, e)),
        }
    }

    Ok(merged
        .into_iter()
        .map(|(s, e)| {
            let peak = filtered[s..=e].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            DetectionEvent {
                trigger_time: x.time_at(s),
                duration_s: ((e - s).max(1)) as f64 / x.rate,
                peak_value: peak,
                band_hz: config.band_hz,
                matched_catalog: None,
            }
        })
        .collect())
}

/// Fills `matched_catalog` with the nearest catalog entry whose origin lies
/// in [trigger − window, trigger]. An origin after the trigger never
/// matches.
pub fn match_catalog(
    events: Vec<DetectionEvent>,
    catalog: &[CatalogEntry],
    window_min: f64,
) -> Result<Vec<DetectionEvent>> {
    if window_min <= 0.0 {
        return Err(Error::Parameter(format!("window {window_min} must be positive")));
    }
    let window = Duration::nanoseconds((window_min * 60.0 * 1e9) as i64);
    Ok(events
        .into_iter()
        .map(|mut ev| {
            ev.matched_catalog = catalog
                .iter()
                .filter(|c| c.origin <= ev.trigger_time && ev.trigger_time - c.origin <= window)
                .min_by_key(|c| ev.trigger_time - c.origin)
                .cloned();
            ev
        })
        .collect())
}

/// Quasi-static tilt per horizontal axis: θ(t) = a(t)/g, with the top
/// displacement `θ·height`.
#[derive(Debug, Clone)]
pub struct TiltSeries {
    pub start: DateTime<Utc>,
    pub rate: f64,
    /// Inclination about each axis, radians.
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub height_m: f64,
    /// Non-fatal precondition findings (e.g. input not low-passed).
    pub warnings: Vec<String>,
}

impl TiltSeries {
    /// Horizontal displacement at the sensor height, millimeters.
    pub fn displacement_mm(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| t * self.height_m * 1000.0).collect()
    }
}

/// Converts low-passed horizontal accelerations into inclination angles.
///
/// For quasi-static motion the tangential acceleration in g equals the
/// tilt angle in radians. Inputs should be low-passed at ≤ 0.5 Hz; if more
/// than 10% of a channel's energy sits above 0.5 Hz a warning is attached.
pub fn tilt_series(
    acc_x: &TimeSeriesSegment,
    acc_y: &TimeSeriesSegment,
    g: f64,
    height_m: f64,
) -> Result<TiltSeries> {
    if acc_x.rate != acc_y.rate {
        return Err(Error::Config(format!(
            "axis rates differ: {} vs {}",
            acc_x.rate, acc_y.rate
        )));
    }
    if acc_x.unit != Unit::MetersPerSecond2 || acc_y.unit != Unit::MetersPerSecond2 {
        return Err(Error::InvalidState("tilt needs m/s² acceleration input".into()));
    }
    let mut warnings = Vec::new();
    for (axis, seg) in [("x", acc_x), ("y", acc_y)] {
        if let Some(frac) = high_frequency_fraction(seg, 0.5)? {
            if frac > 0.10 {
                warnings.push(format!(
                    "axis {axis}: {:.0}% of signal energy above 0.5 Hz; input looks unfiltered",
                    frac * 100.0
                ));
            }
        }
    }
    Ok(TiltSeries {
        start: acc_x.start,
        rate: acc_x.rate,
        theta_x: acc_x.samples.iter().map(|a| a / g).collect(),
        theta_y: acc_y.samples.iter().map(|a| a / g).collect(),
        height_m,
        warnings,
    })
}

/// Fraction of variance above `cutoff_hz`, or None for degenerate input.
fn high_frequency_fraction(seg: &TimeSeriesSegment, cutoff_hz: f64) -> Result<Option<f64>> {
    if seg.samples.len() < 16 || cutoff_hz >= seg.rate / 2.0 {
        return Ok(None);
    }
    let sos = design_butterworth(FilterKind::Lowpass(cutoff_hz), 4, seg.rate)?;
    let low = sos.filtfilt(&seg.samples);
    let mean = seg.samples.iter().sum::<f64>() / seg.samples.len() as f64;
    let total: f64 = seg.samples.iter().map(|v| (v - mean) * (v - mean)).sum();
    if total == 0.0 {
        return Ok(None);
    }
    let high: f64 = seg
        .samples
        .iter()
        .zip(&low)
        .map(|(v, l)| (v - l) * (v - l))
        .sum();
    Ok(Some((high / total).min(1.0)))
}

/// Lag of the y-axis daily tilt component relative to x, in hours
/// (positive = y delayed), from the cross-correlation of band-limited
/// daily components. Requires at least three days of data.
pub fn axis_phase_shift(tilt: &TiltSeries, period_band_h: (f64, f64)) -> Result<f64> {
    let n = tilt.theta_x.len().min(tilt.theta_y.len());
    let span_s = n as f64 / tilt.rate;
    if span_s < 3.0 * 86400.0 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 3 days, got {:.1} h",
            span_s / 3600.0
        )));
    }
    // Average into 10-minute bins; daily components survive untouched.
    let bin = (600.0 * tilt.rate).round() as usize;
    let bins = n / bin;
    let reduce = |x: &[f64]| -> Vec<f64> {
        (0..bins)
            .map(|b| x[b * bin..(b + 1) * bin].iter().sum::<f64>() / bin as f64)
            .collect()
    };
    let bin_rate = 1.0 / 600.0;
    let lo_hz = 1.0 / (period_band_h.1 * 3600.0);
    let hi_hz = 1.0 / (period_band_h.0 * 3600.0);
    let sos = design_butterworth(FilterKind::Bandpass(lo_hz, hi_hz), 2, bin_rate)?;
    let x = sos.filtfilt(&reduce(&tilt.theta_x[..n]));
    let y = sos.filtfilt(&reduce(&tilt.theta_y[..n]));

    // r(lag) = Σ x[k − lag] · y[k], normalized; y delayed ⇒ positive lag.
    let max_lag = (14.0 * 3600.0 * bin_rate).round() as i64; // ±14 h
    let mut best = (0i64, f64::NEG_INFINITY);
    let mut correlations = BTreeMap::new();
    for lag in -max_lag..=max_lag {
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for k in 0..bins as i64 {
            let j = k - lag;
            if j < 0 || j >= bins as i64 {
                continue;
            }
            sxy += x[j as usize] * y[k as usize];
            sxx += x[j as usize] * x[j as usize];
            syy += y[k as usize] * y[k as usize];
        }
        let r = if sxx > 0.0 && syy > 0.0 {
            sxy / (sxx * syy).sqrt()
        } else {
            f64::NEG_INFINITY
        };
        correlations.insert(lag, r);
        if r > best.1 {
            best = (lag, r);
        }
    }
    // Parabolic refinement around the peak for sub-bin resolution.
    let (lag, _) = best;
    let refine = match (correlations.get(&(lag - 1)), correlations.get(&(lag + 1))) {
        (Some(&rm), Some(&rp)) if rm.is_finite() && rp.is_finite() => {
            let denom = rm - 2.0 * best.1 + rp;
            if denom.abs() > 1e-30 {
                0.5 * (rm - rp) / denom
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    Ok((lag as f64 + refine) / bin_rate / 3600.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Channel, ChannelMeta, Component, SensorKind};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2018, 1, 14, 9, 0, 0).unwrap()
    }

    fn acc_segment(start: DateTime<Utc>, rate: f64, samples: Vec<f64>) -> TimeSeriesSegment {
        TimeSeriesSegment::new(start, rate, Unit::MetersPerSecond2, samples).unwrap()
    }

    fn acc_record(samples: Vec<f64>, rate: f64) -> MultiChannelRecord {
        MultiChannelRecord::new(vec![Channel {
            meta: ChannelMeta::new("S2", Component::X, 37.0, SensorKind::Acceleration, 1.0, rate)
                .unwrap(),
            segments: vec![acc_segment(t0(), rate, samples)],
        }])
        .unwrap()
    }

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1 = 1.0 - (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    #[test]
    fn hourly_max_zeros() {
        let rec = acc_record(vec![0.0; 2 * 3600 * 20], 20.0);
        let levels = hourly_max_abs(&rec).unwrap();
        assert_eq!(levels.channels[0].1.len(), 2);
        assert!(levels.channels[0].1.iter().all(|p| p.value == 0.0));
    }

    #[test]
    fn hourly_max_finds_spike() {
        let rate = 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x: Vec<f64> = (0..3 * 3600 * 20).map(|_| 1e-5 * gaussian(&mut rng)).collect();
        // Spike in hour 2 (the third hour starts at index 2*3600*20).
        x[2 * 3600 * 20 + 500] = 5e-3;
        let levels = hourly_max_abs(&acc_record(x, rate)).unwrap();
        let points = &levels.channels[0].1;
        assert_eq!(points.len(), 3);
        assert!((points[2].value - 5e-3).abs() < 1e-12);
        assert!(points[0].value < 1e-4);
        assert!(points[1].value < 1e-4);
    }

    #[test]
    fn hourly_max_rejects_velocity() {
        let rec = MultiChannelRecord::new(vec![Channel {
            meta: ChannelMeta::new("S943", Component::X, 24.0, SensorKind::Velocity, 1.0, 20.0)
                .unwrap(),
            segments: vec![TimeSeriesSegment::new(
                t0(),
                20.0,
                Unit::MetersPerSecond,
                vec![0.0; 100],
            )
            .unwrap()],
        }])
        .unwrap();
        assert!(hourly_max_abs(&rec).is_err());
    }

    #[test]
    fn daily_avg_constant_and_flags() {
        let hourly = LevelSeries {
            granularity: LevelGranularity::HourlyMax,
            channels: vec![(
                "S2.x".into(),
                (0..35)
                    .map(|h| LevelPoint {
                        time: Utc.with_ymd_and_hms(2018, 1, 14, 0, 0, 0).unwrap()
                            + Duration::hours(h),
                        value: 3.0e-4,
                        flagged: false,
                    })
                    .collect(),
            )],
        };
        let daily = daily_avg_hourly_max(&hourly).unwrap();
        let points = &daily.channels[0].1;
        assert_eq!(points.len(), 2);
        // Day 1 has 24 valid hours; day 2 only 11 → flagged.
        assert!((points[0].value - 3.0e-4).abs() < 1e-18);
        assert!(!points[0].flagged);
        assert!(points[1].flagged);
    }

    #[test]
    fn daily_avg_known_mean() {
        let values: Vec<f64> = (1..=24).map(|k| k as f64).collect();
        let hourly = LevelSeries {
            granularity: LevelGranularity::HourlyMax,
            channels: vec![(
                "S2.y".into(),
                values
                    .iter()
                    .enumerate()
                    .map(|(h, &v)| LevelPoint {
                        time: Utc.with_ymd_and_hms(2018, 1, 14, 0, 0, 0).unwrap()
                            + Duration::hours(h as i64),
                        value: v,
                        flagged: false,
                    })
                    .collect(),
            )],
        };
        let daily = daily_avg_hourly_max(&hourly).unwrap();
        let expected = values.iter().sum::<f64>() / 24.0;
        assert!((daily.channels[0].1[0].value - expected).abs() < 1e-12);
    }

    #[test]
    fn sta_lta_quiet_noise_no_triggers() {
        let rate = 100.0;
        // 10 seeds × 1 h of stationary noise; the 4.0 threshold must hold.
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..(3600.0 * rate) as usize)
                .map(|_| 1e-4 * gaussian(&mut rng))
                .collect();
            let seg = acc_segment(t0(), rate, x);
            let events = sta_lta_detect(&seg, 1.0, 30.0, 4.0, 1.5).unwrap();
            assert!(events.is_empty(), "seed {seed}: {} false triggers", events.len());
        }
    }

    #[test]
    fn sta_lta_catches_burst() {
        let rate = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = (1800.0 * rate) as usize;
        let mut x: Vec<f64> = (0..n).map(|_| 1e-4 * gaussian(&mut rng)).collect();
        // 20 s burst at 10× amplitude, starting at t = 600 s.
        let burst_start = (600.0 * rate) as usize;
        let burst_end = burst_start + (20.0 * rate) as usize;
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        for v in x[burst_start..burst_end].iter_mut() {
            *v = 1e-3 * gaussian(&mut rng2);
        }
        let seg = acc_segment(t0(), rate, x);
        let events = sta_lta_detect(&seg, 1.0, 30.0, 4.0, 1.5).unwrap();
        assert_eq!(events.len(), 1, "events: {events:?}");
        let ev = &events[0];
        let onset = (ev.trigger_time - t0()).num_seconds();
        assert!((onset - 600).abs() <= 2, "trigger at {onset} s");
        assert!(ev.duration_s >= 19.0, "duration {}", ev.duration_s);
    }

    #[test]
    fn sta_lta_zero_signal() {
        let seg = acc_segment(t0(), 100.0, vec![0.0; 100_000]);
        assert!(sta_lta_detect(&seg, 1.0, 30.0, 4.0, 1.5).unwrap().is_empty());
    }

    #[test]
    fn sta_lta_scale_invariant() {
        let rate = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = (900.0 * rate) as usize;
        let mut x: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        for v in x[30_000..32_000].iter_mut() {
            *v *= 12.0;
        }
        let seg1 = acc_segment(t0(), rate, x.clone());
        let seg2 = acc_segment(t0(), rate, x.iter().map(|v| v * 1e-6).collect());
        let e1 = sta_lta_detect(&seg1, 1.0, 30.0, 4.0, 1.5).unwrap();
        let e2 = sta_lta_detect(&seg2, 1.0, 30.0, 4.0, 1.5).unwrap();
        assert_eq!(e1.len(), e2.len());
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!(a.trigger_time, b.trigger_time);
        }
    }

    #[test]
    fn teleseism_packet_detected_with_correct_extent() {
        let rate = 20.0;
        let n = (7200.0 * rate) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Background: band-limited-ish microseism noise at low amplitude.
        let mut x: Vec<f64> = (0..n).map(|_| 1e-6 * gaussian(&mut rng)).collect();
        // 0.1 Hz wavepacket at 8× the background envelope, centered at 3600 s.
        for (k, v) in x.iter_mut().enumerate() {
            let t = k as f64 / rate;
            let env = (-((t - 3600.0) / 240.0).powi(2)).exp();
            *v += 8e-6 * env * (2.0 * PI * 0.1 * (t - 3600.0)).sin();
        }
        let seg = acc_segment(t0(), rate, x);
        let events = teleseism_scan(&seg, &TeleseismConfig::default()).unwrap();
        assert_eq!(events.len(), 1, "{events:?}");
        let ev = &events[0];
        let onset = (ev.trigger_time - t0()).num_seconds() as f64;
        let end = onset + ev.duration_s;
        // Packet effectively spans roughly 3600 ± 400 s; the detection must
        // cover the core and stay within ±2 min of the visible packet.
        assert!(onset > 3000.0 && onset < 3600.0, "onset {onset}");
        assert!(end > 3600.0 && end < 4200.0, "end {end}");
    }

    #[test]
    fn teleseism_ignores_high_frequency_content() {
        let rate = 20.0;
        let n = (3600.0 * rate) as usize;
        // Strong 5 Hz tone only: nothing in the 0.04–1 Hz band.
        let x: Vec<f64> = (0..n)
            .map(|k| 100.0 * (2.0 * PI * 5.0 * k as f64 / rate).sin())
            .collect();
        let seg = acc_segment(t0(), rate, x);
        let events = teleseism_scan(&seg, &TeleseismConfig::default()).unwrap();
        assert!(events.is_empty(), "{events:?}");
    }

    #[test]
    fn teleseism_zeros_no_events() {
        let seg = acc_segment(t0(), 20.0, vec![0.0; 72_000]);
        assert!(teleseism_scan(&seg, &TeleseismConfig::default()).unwrap().is_empty());
    }

    fn entry(ts: &str, location: &str, mag: f64) -> CatalogEntry {
        CatalogEntry {
            origin: ts.parse().unwrap(),
            location: location.into(),
            magnitude: mag,
        }
    }

    fn event_at(ts: &str) -> DetectionEvent {
        DetectionEvent {
            trigger_time: ts.parse().unwrap(),
            duration_s: 60.0,
            peak_value: 1e-5,
            band_hz: (0.04, 1.0),
            matched_catalog: None,
        }
    }

    #[test]
    fn catalog_matches_teleseism_with_propagation_delay() {
        // Origin 09:18:44, arrival observed about 09:33.
        let catalog = vec![entry("2018-01-14T09:18:44Z", "Peru", 7.1)];
        let events = match_catalog(
            vec![event_at("2018-01-14T09:33:00Z")],
            &catalog,
            DEFAULT_TELESEISM_WINDOW_MIN,
        )
        .unwrap();
        let matched = events[0].matched_catalog.as_ref().unwrap();
        assert_eq!(matched.location, "Peru");
        assert_eq!(matched.magnitude, 7.1);
    }

    #[test]
    fn catalog_matches_regional_event() {
        let catalog = vec![
            entry("2017-11-19T12:10:12Z", "Parma", 3.3),
            entry("2017-11-19T12:37:44Z", "Parma", 4.4),
        ];
        let events = match_catalog(
            vec![event_at("2017-11-19T12:38:30Z")],
            &catalog,
            DEFAULT_REGIONAL_WINDOW_MIN,
        )
        .unwrap();
        let matched = events[0].matched_catalog.as_ref().unwrap();
        assert_eq!(matched.magnitude, 4.4);
    }

    #[test]
    fn catalog_never_matches_future_origin() {
        let catalog = vec![entry("2018-01-14T09:40:00Z", "Future", 6.0)];
        let events = match_catalog(vec![event_at("2018-01-14T09:33:00Z")], &catalog, 30.0).unwrap();
        assert!(events[0].matched_catalog.is_none());
    }

    #[test]
    fn catalog_empty_no_matches() {
        let events = match_catalog(vec![event_at("2018-01-14T09:33:00Z")], &[], 30.0).unwrap();
        assert!(events[0].matched_catalog.is_none());
    }

    #[test]
    fn tilt_identity_values() {
        let a = 9.80665e-4;
        let x = acc_segment(t0(), 20.0, vec![a; 64]);
        let y = acc_segment(t0(), 20.0, vec![0.0; 64]);
        let tilt = tilt_series(&x, &y, STANDARD_GRAVITY, 37.0).unwrap();
        // Exact up to one ulp of the f64 division.
        assert!((tilt.theta_x[0] - 1.0e-4).abs() < 1e-18);
        assert_eq!(tilt.theta_y[0], 0.0);
        let d = tilt.displacement_mm(&tilt.theta_x);
        assert!((d[0] - 3.7).abs() < 1e-12, "displacement {} mm", d[0]);
        // Inside the 3–4 mm range reported for the instrument height.
        assert!(d[0] > 3.0 && d[0] < 4.0);
    }

    #[test]
    fn tilt_warns_on_unfiltered_input() {
        let rate = 20.0;
        let x: Vec<f64> = (0..20_000)
            .map(|k| 1e-4 * (2.0 * PI * 3.0 * k as f64 / rate).sin())
            .collect();
        let seg_x = acc_segment(t0(), rate, x);
        let seg_y = acc_segment(t0(), rate, vec![0.0; 20_000]);
        let tilt = tilt_series(&seg_x, &seg_y, STANDARD_GRAVITY, 37.0).unwrap();
        assert!(!tilt.warnings.is_empty());
    }

    fn daily_tilt(rate: f64, days: f64, phase_shift_h: f64) -> TiltSeries {
        let n = (days * 86400.0 * rate) as usize;
        let omega = 2.0 * PI / 86400.0;
        let mk = |delay_s: f64| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let t = k as f64 / rate;
                    1e-4 * (omega * (t - delay_s)).sin()
                })
                .collect()
        };
        TiltSeries {
            start: t0(),
            rate,
            theta_x: mk(0.0),
            theta_y: mk(phase_shift_h * 3600.0),
            height_m: 37.0,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn phase_shift_recovers_four_hours() {
        let tilt = daily_tilt(0.1, 4.0, 4.0);
        let lag = axis_phase_shift(&tilt, (20.0, 28.0)).unwrap();
        assert!((lag - 4.0).abs() < 0.5, "lag {lag} h");
    }

    #[test]
    fn phase_shift_identical_axes_zero() {
        let tilt = daily_tilt(0.1, 3.5, 0.0);
        let lag = axis_phase_shift(&tilt, (20.0, 28.0)).unwrap();
        assert!(lag.abs() < 0.3, "lag {lag} h");
    }

    #[test]
    fn phase_shift_needs_three_days() {
        let tilt = daily_tilt(0.1, 1.0, 2.0);
        assert!(matches!(
            axis_phase_shift(&tilt, (20.0, 28.0)),
            Err(Error::InsufficientData(_))
        ));
    }
}
