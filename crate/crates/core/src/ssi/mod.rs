//! Covariance-driven stochastic subspace identification (SSI-Cov).
//!
//! Output covariances → block-Toeplitz matrix → SVD-truncated state-space
//! realization → modal parameters, swept over model orders into a
//! stabilization diagram whose stable poles are clustered into one mode
//! estimate per physical mode.

mod eig;

use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::data::MultiChannelRecord;
use crate::dsp::{detrend_slice, DetrendMode};
use crate::modal::mac;
use crate::{Error, Result};

/// Output covariance matrices Λ_k for lags 0..=max_lag.
#[derive(Debug, Clone)]
pub struct CovarianceSequence {
    /// matrices[k] is the l×l covariance at lag k.
    pub matrices: Vec<DMatrix<f64>>,
    /// Sample interval, seconds.
    pub dt: f64,
}

impl CovarianceSequence {
    pub fn n_channels(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn max_lag(&self) -> usize {
        self.matrices.len().saturating_sub(1)
    }
}

/// Λ_k = (1/(N−k)) Σ_t y_{t+k} y_tᵀ for k = 0..=max_lag.
///
/// Channels must be detrended and of equal length N > 10·max_lag.
pub fn output_covariances(y: &[Vec<f64>], dt: f64, max_lag: usize) -> Result<CovarianceSequence> {
    let l = y.len();
    if l == 0 {
        return Err(Error::Parameter("no channels".into()));
    }
    let n = y[0].len();
    if y.iter().any(|c| c.len() != n) {
        return Err(Error::Parameter("channels differ in length".into()));
    }
    if n <= 10 * max_lag {
        return Err(Error::Parameter(format!(
            "N = {n} too short for max_lag {max_lag} (need N > {})",
            10 * max_lag
        )));
    }
    let mut matrices = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let mut m = DMatrix::<f64>::zeros(l, l);
        let count = (n - k) as f64;
        for i in 0..l {
            let yi = &y[i][k..];
            for j in 0..l {
                let yj = &y[j][..n - k];
                let mut acc = 0.0;
                for (a, b) in yi.iter().zip(yj) {
                    acc += a * b;
                }
                m[(i, j)] = acc / count;
            }
        }
        matrices.push(m);
    }
    Ok(CovarianceSequence { matrices, dt })
}

/// Block-Toeplitz matrix of output covariances: block (p, q) = Λ_{i+p−q}
/// for p, q = 1..=i, spanning lags 1..=2i−1.
pub fn block_toeplitz(cov: &CovarianceSequence, block_rows: usize) -> Result<DMatrix<f64>> {
    let i = block_rows;
    if i == 0 {
        return Err(Error::Parameter("block_rows must be positive".into()));
    }
    if cov.max_lag() < 2 * i - 1 {
        return Err(Error::Parameter(format!(
            "need lags up to {} but covariance holds {}",
            2 * i - 1,
            cov.max_lag()
        )));
    }
    let l = cov.n_channels();
    let mut t = DMatrix::<f64>::zeros(l * i, l * i);
    for p in 1..=i {
        for q in 1..=i {
            let lam = &cov.matrices[i + p - q];
            t.view_mut(((p - 1) * l, (q - 1) * l), (l, l)).copy_from(lam);
        }
    }
    Ok(t)
}

/// Discrete state-space realization (A, C) identified at one model order.
#[derive(Debug, Clone)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub dt: f64,
    pub order: usize,
    /// Ratio s_{n-1}/s_n of the singular values bracketing the truncation;
    /// close to 1 means no clear gap at this order.
    pub sv_gap: f64,
}

/// Holds the SVD of the Toeplitz matrix so a whole order sweep reuses it.
pub struct Realizer {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    n_channels: usize,
    block_rows: usize,
    dt: f64,
}

impl Realizer {
    pub fn new(toeplitz: &DMatrix<f64>, n_channels: usize, block_rows: usize, dt: f64) -> Result<Self> {
        if toeplitz.nrows() != n_channels * block_rows {
            return Err(Error::Parameter(format!(
                "Toeplitz dimension {} does not match {} channels × {} block rows",
                toeplitz.nrows(),
                n_channels,
                block_rows
            )));
        }
        let svd = toeplitz.clone().svd(true, false);
        let mut u = svd
            .u
            .ok_or_else(|| Error::Numerical("SVD did not produce U".into()))?;
        // The one-shot SVD can lose several digits of subspace accuracy on
        // block-Toeplitz matrices of this size. Two rounds of orthogonal
        // iteration polish U: every application of T lands exactly in
        // range(T), so a low-rank T yields its column space to machine
        // precision and the realization stays exact for exact covariances.
        for _ in 0..2 {
            let z = toeplitz * (toeplitz.transpose() * &u);
            u = z.qr().q();
        }
        let w = toeplitz.transpose() * &u;
        let singular_values = DVector::from_iterator(
            w.ncols(),
            w.column_iter().map(|col| col.norm()),
        );
        Ok(Self {
            u,
            singular_values,
            n_channels,
            block_rows,
            dt,
        })
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// Realizes (A, C) at order `n` from the truncated observability matrix
    /// O = U_n √S_n; A solves the shift-invariance least squares
    /// O↑ A = O↓ and C is the first block row of O.
    pub fn realize(&self, n: usize) -> Result<StateSpaceRealization> {
        let l = self.n_channels;
        let i = self.block_rows;
        if n == 0 {
            return Ok(StateSpaceRealization {
                a: DMatrix::zeros(0, 0),
                c: DMatrix::zeros(l, 0),
                dt: self.dt,
                order: 0,
                sv_gap: f64::INFINITY,
            });
        }
        if n > self.singular_values.len() || n > (i - 1) * l {
            return Err(Error::Parameter(format!(
                "order {n} exceeds what {i} block rows of {l} channels support"
            )));
        }
        let mut obs = DMatrix::<f64>::zeros(l * i, n);
        for col in 0..n {
            let s_sqrt = self.singular_values[col].max(0.0).sqrt();
            for row in 0..l * i {
                obs[(row, col)] = self.u[(row, col)] * s_sqrt;
            }
        }
        let c = obs.rows(0, l).into_owned();
        let o_up = obs.rows(0, l * (i - 1)).into_owned();
        let o_down = obs.rows(l, l * (i - 1)).into_owned();
        let a = o_up
            .svd(true, true)
            .solve(&o_down, 1e-14)
            .map_err(|e| Error::Numerical(format!("shift-invariance solve failed: {e}")))?;
        let sv_gap = if n < self.singular_values.len() && self.singular_values[n] > 0.0 {
            self.singular_values[n - 1] / self.singular_values[n]
        } else {
            f64::INFINITY
        };
        Ok(StateSpaceRealization {
            a,
            c,
            dt: self.dt,
            order: n,
            sv_gap,
        })
    }
}

/// One-shot realization; order sweeps should use [`Realizer`] directly.
pub fn realize(
    toeplitz: &DMatrix<f64>,
    n: usize,
    n_channels: usize,
    block_rows: usize,
    dt: f64,
) -> Result<StateSpaceRealization> {
    Realizer::new(toeplitz, n_channels, block_rows, dt)?.realize(n)
}

/// One identified pole: frequency, damping ratio and complex mode shape.
#[derive(Debug, Clone)]
pub struct PoleEstimate {
    pub freq_hz: f64,
    /// Fraction of critical damping.
    pub damping: f64,
    /// Complex shape, normalized to unit maximum modulus.
    pub shape: Vec<Complex64>,
    /// Model order the pole was identified at.
    pub order: usize,
    pub window_start: Option<DateTime<Utc>>,
}

/// Modal content of a realization, plus how many non-physical poles
/// (negative real axis) were discarded.
#[derive(Debug, Clone)]
pub struct ModalDecomposition {
    pub poles: Vec<PoleEstimate>,
    pub discarded_real: usize,
}

/// Converts eigenpairs of A into modal parameters.
///
/// For each eigenvalue μ with Im μ > 0: λ = ln(μ)/dt, f = |λ|/2π,
/// ξ = −Re λ/|λ|, φ = C ψ normalized to unit maximum modulus. Poles on the
/// negative real axis are counted and discarded (non-physical here);
/// the conjugate of every retained pole is implicit.
pub fn poles_to_modal(ss: &StateSpaceRealization) -> Result<ModalDecomposition> {
    if ss.order == 0 {
        return Ok(ModalDecomposition {
            poles: Vec::new(),
            discarded_real: 0,
        });
    }
    let pairs = eig::complex_eigenpairs(&ss.a)?;
    let c_complex = ss.c.map(|v| Complex64::new(v, 0.0));
    let mut poles = Vec::new();
    let mut discarded = 0usize;
    for p in &pairs {
        let mu = p.value;
        if mu.im <= 0.0 {
            if mu.im == 0.0 && mu.re < 0.0 {
                discarded += 1;
            }
            continue;
        }
        let lambda = Complex64::new(mu.norm().ln(), mu.arg()) / ss.dt;
        let omega = lambda.norm();
        if omega == 0.0 {
            continue;
        }
        let freq_hz = omega / (2.0 * PI);
        let damping = -lambda.re / omega;
        let shape = normalize_shape((&c_complex * &p.vector).iter().copied().collect());
        poles.push(PoleEstimate {
            freq_hz,
            damping,
            shape,
            order: ss.order,
            window_start: None,
        });
    }
    poles.sort_by(|a, b| a.freq_hz.partial_cmp(&b.freq_hz).unwrap());
    Ok(ModalDecomposition {
        poles,
        discarded_real: discarded,
    })
}

/// Scales so the largest-modulus entry becomes exactly 1 + 0i.
pub fn normalize_shape(mut shape: Vec<Complex64>) -> Vec<Complex64> {
    let Some(idx) = shape
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .map(|(i, _)| i)
    else {
        return shape;
    };
    let pivot = shape[idx];
    if pivot.norm() == 0.0 {
        return shape;
    }
    for v in shape.iter_mut() {
        *v /= pivot;
    }
    shape
}

/// Stability of a pole relative to the previous model order.
#[derive(Debug, Clone, Copy, Default)]
pub struct StabilityFlags {
    /// A comparable pole existed at the previous order.
    pub has_reference: bool,
    pub freq_stable: bool,
    pub damping_stable: bool,
    pub shape_stable: bool,
}

impl StabilityFlags {
    pub fn all_stable(&self) -> bool {
        self.has_reference && self.freq_stable && self.damping_stable && self.shape_stable
    }
}

#[derive(Debug, Clone)]
pub struct DiagramPole {
    pub pole: PoleEstimate,
    pub flags: StabilityFlags,
}

/// Poles across a model-order sweep with stability flags.
#[derive(Debug, Clone)]
pub struct StabilizationDiagram {
    pub poles: Vec<DiagramPole>,
    pub orders: Vec<usize>,
}

/// SSI parameters; defaults follow common ambient-monitoring practice.
#[derive(Debug, Clone)]
pub struct SsiConfig {
    /// Block rows i of the Toeplitz matrix (uses lags 1..=2i−1).
    pub block_rows: usize,
    /// Model orders to sweep, increasing.
    pub orders: Vec<usize>,
    /// Relative frequency tolerance for stability (e.g. 0.01 = 1%).
    pub freq_tol: f64,
    /// Relative damping tolerance for stability.
    pub damping_tol: f64,
    /// Minimum MAC between shapes at consecutive orders.
    pub mac_min: f64,
    /// Clusters smaller than this fraction of the tested orders are noise.
    pub min_cluster_fraction: f64,
    /// Single-linkage distance cap for clustering.
    pub distance_cap: f64,
}

/// Default block rows for a sample rate: enough lags to span two periods
/// of a 0.5 Hz fundamental, capped at 200 lags.
pub fn default_block_rows(rate_hz: f64) -> usize {
    let lags = ((2.0 * rate_hz / 0.5).ceil() as usize).min(200);
    (lags / 2).max(2)
}

impl SsiConfig {
    pub fn for_rate(rate_hz: f64) -> Self {
        Self {
            block_rows: default_block_rows(rate_hz),
            orders: (1..=20).map(|k| 2 * k).collect(),
            freq_tol: 0.01,
            damping_tol: 0.05,
            mac_min: 0.95,
            min_cluster_fraction: 1.0 / 3.0,
            distance_cap: 0.02,
        }
    }

    pub fn min_cluster_size(&self) -> usize {
        ((self.orders.len() as f64) * self.min_cluster_fraction).ceil() as usize
    }
}

/// Builds the stabilization diagram for one window of equal-length,
/// detrended channels. Orders beyond what the Toeplitz matrix supports
/// ((i−1)·l) are skipped.
pub fn stabilization(y: &[Vec<f64>], dt: f64, config: &SsiConfig) -> Result<StabilizationDiagram> {
    if config.orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("orders must be strictly increasing".into()));
    }
    let i = config.block_rows;
    let cov = output_covariances(y, dt, 2 * i - 1)?;
    let t = block_toeplitz(&cov, i)?;
    let realizer = Realizer::new(&t, y.len(), i, dt)?;
    let max_order = (i - 1) * y.len();

    let mut diagram = Vec::new();
    let mut previous: Vec<PoleEstimate> = Vec::new();
    for &n in config.orders.iter().filter(|&&n| n <= max_order) {
        let ss = realizer.realize(n)?;
        let current = poles_to_modal(&ss)?.poles;
        for pole in &current {
            let flags = flag_stability(pole, &previous, config);
            diagram.push(DiagramPole {
                pole: pole.clone(),
                flags,
            });
        }
        previous = current;
    }
    Ok(StabilizationDiagram {
        poles: diagram,
        orders: config.orders.iter().copied().filter(|&n| n <= max_order).collect(),
    })
}

fn flag_stability(pole: &PoleEstimate, previous: &[PoleEstimate], config: &SsiConfig) -> StabilityFlags {
    // Compare with the nearest-in-frequency pole of the previous order.
    let Some(reference) = previous.iter().min_by(|a, b| {
        (a.freq_hz - pole.freq_hz)
            .abs()
            .partial_cmp(&(b.freq_hz - pole.freq_hz).abs())
            .unwrap()
    }) else {
        return StabilityFlags::default();
    };
    let freq_stable = (pole.freq_hz - reference.freq_hz).abs() / pole.freq_hz < config.freq_tol;
    let damping_stable = if pole.damping.abs() > 0.0 {
        (pole.damping - reference.damping).abs() / pole.damping.abs() < config.damping_tol
    } else {
        pole.damping == reference.damping
    };
    let shape_stable = match mac(&pole.shape, &reference.shape) {
        Ok(v) => v > config.mac_min,
        Err(_) => false,
    };
    StabilityFlags {
        has_reference: true,
        freq_stable,
        damping_stable,
        shape_stable,
    }
}

/// One physical mode distilled from a stabilization-diagram cluster.
#[derive(Debug, Clone)]
pub struct ModeEstimate {
    pub freq_hz: f64,
    pub damping: f64,
    pub shape: Vec<Complex64>,
    /// Order of the pole nearest the cluster medians.
    pub order: usize,
    pub cluster_size: usize,
    pub window_start: Option<DateTime<Utc>>,
}

/// Single-linkage clustering of the fully stable poles with
/// d(p, q) = |Δf|/max(f) + (1 − MAC). Clusters smaller than `min_count`
/// are discarded; each survivor yields median frequency and damping plus
/// the shape of the pole nearest those medians.
pub fn cluster_modes(
    diagram: &StabilizationDiagram,
    distance_cap: f64,
    min_count: usize,
) -> Vec<ModeEstimate> {
    let stable: Vec<&PoleEstimate> = diagram
        .poles
        .iter()
        .filter(|p| p.flags.all_stable())
        .map(|p| &p.pole)
        .collect();
    if stable.is_empty() {
        return Vec::new();
    }
    // Union-find over the threshold graph = single-linkage cut at the cap.
    let mut parent: Vec<usize> = (0..stable.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..stable.len() {
        for b in (a + 1)..stable.len() {
            let p = stable[a];
            let q = stable[b];
            let df = (p.freq_hz - q.freq_hz).abs() / p.freq_hz.max(q.freq_hz);
            let d = df + (1.0 - mac(&p.shape, &q.shape).unwrap_or(0.0));
            if d <= distance_cap {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<&PoleEstimate>> = Default::default();
    for k in 0..stable.len() {
        let root = find(&mut parent, k);
        clusters.entry(root).or_default().push(stable[k]);
    }

    let mut modes = Vec::new();
    for members in clusters.values() {
        if members.len() < min_count.max(1) {
            continue;
        }
        let median = |mut v: Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        let med_f = median(members.iter().map(|p| p.freq_hz).collect());
        let med_xi = median(members.iter().map(|p| p.damping).collect());
        let nearest = members
            .iter()
            .min_by(|a, b| {
                let da = (a.freq_hz - med_f).abs() / med_f
                    + (a.damping - med_xi).abs() / med_xi.abs().max(1e-12);
                let db = (b.freq_hz - med_f).abs() / med_f
                    + (b.damping - med_xi).abs() / med_xi.abs().max(1e-12);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        modes.push(ModeEstimate {
            freq_hz: med_f,
            damping: med_xi,
            shape: nearest.shape.clone(),
            order: nearest.order,
            cluster_size: members.len(),
            window_start: nearest.window_start,
        });
    }
    modes.sort_by(|a, b| a.freq_hz.partial_cmp(&b.freq_hz).unwrap());
    modes
}

/// Full SSI pass over one window record: detrend, stabilize, cluster.
///
/// Channels are linearly detrended and truncated to a common length; gaps
/// inside an accepted window (at most 5% of it) are closed by
/// concatenation, which is acceptable for covariance estimates at this
/// coverage level.
pub fn identify_window(record: &MultiChannelRecord, config: &SsiConfig) -> Result<Vec<ModeEstimate>> {
    let window_start = record.time_span().map(|(lo, _)| lo);
    let mut y: Vec<Vec<f64>> = record
        .channels
        .iter()
        .map(|ch| detrend_slice(&ch.contiguous_samples(), DetrendMode::Linear))
        .collect();
    let min_len = y.iter().map(|c| c.len()).min().unwrap_or(0);
    for c in y.iter_mut() {
        c.truncate(min_len);
    }
    let dt = 1.0
        / record
            .common_rate()
            .ok_or_else(|| Error::Config("channels disagree on sample rate".into()))?;
    let diagram = stabilization(&y, dt, config)?;
    let mut modes = cluster_modes(&diagram, config.distance_cap, config.min_cluster_size());
    for m in modes.iter_mut() {
        m.window_start = window_start;
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        calibrate_noise_for_snr, simulate, ExcitationKind, ExcitationSpec, OutputKind, SimMode,
    };
    use chrono::TimeZone;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 11, 18, 0, 0, 0).unwrap()
    }

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1 = 1.0 - (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    #[test]
    fn white_noise_covariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let y = vec![(0..n).map(|_| gaussian(&mut rng)).collect::<Vec<f64>>()];
        let cov = output_covariances(&y, 0.01, 20).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        assert!((cov.matrices[0][(0, 0)] - 1.0).abs() < 0.02);
        for k in 1..=20 {
            assert!(
                cov.matrices[k][(0, 0)].abs() < bound,
                "lag {k}: {} exceeds {bound}",
                cov.matrices[k][(0, 0)]
            );
        }
    }

    #[test]
    fn sinusoid_autocovariance_analytic() {
        // Λ_k of a*cos(2π f t dt) tends to (a²/2) cos(2π f k dt).
        let (a, f, dt) = (2.0, 1.3, 0.01);
        let n = 100_000;
        let y = vec![(0..n)
            .map(|t| a * (2.0 * PI * f * t as f64 * dt).cos())
            .collect::<Vec<f64>>()];
        let cov = output_covariances(&y, dt, 50).unwrap();
        for k in 0..=50 {
            let expected = a * a / 2.0 * (2.0 * PI * f * k as f64 * dt).cos();
            assert!(
                (cov.matrices[k][(0, 0)] - expected).abs() < 0.01 * a * a / 2.0,
                "lag {k}: got {}, expected {expected}",
                cov.matrices[k][(0, 0)]
            );
        }
    }

    #[test]
    fn zero_signal_zero_covariances() {
        let y = vec![vec![0.0; 1000]; 2];
        let cov = output_covariances(&y, 0.01, 10).unwrap();
        assert!(cov.matrices.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn too_short_rejected() {
        let y = vec![vec![0.0; 100]];
        assert!(output_covariances(&y, 0.01, 10).is_err());
    }

    #[test]
    fn toeplitz_definition_unrolled() {
        // l = 1, lags [_, a, b, c], i = 2 → [[b, a], [c, b]].
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let cov = CovarianceSequence {
            matrices: vec![m(9.0), m(1.0), m(2.0), m(3.0)],
            dt: 0.01,
        };
        let t = block_toeplitz(&cov, 2).unwrap();
        assert_eq!(t[(0, 0)], 2.0);
        assert_eq!(t[(0, 1)], 1.0);
        assert_eq!(t[(1, 0)], 3.0);
        assert_eq!(t[(1, 1)], 2.0);
    }

    #[test]
    fn toeplitz_dimensions() {
        let l = 3;
        let cov = CovarianceSequence {
            matrices: (0..20).map(|k| DMatrix::from_element(l, l, k as f64)).collect(),
            dt: 0.01,
        };
        let t = block_toeplitz(&cov, 10).unwrap();
        assert_eq!(t.nrows(), 30);
        assert_eq!(t.ncols(), 30);
        assert!(block_toeplitz(&cov, 11).is_err());
    }

    // ---- Exact-covariance oracle -------------------------------------
    //
    // For a known discrete model (A, C) with state noise covariance Q the
    // stationary state covariance solves Σ = AΣAᵀ + Q; the exact output
    // covariances are Λ_0 = CΣCᵀ and Λ_k = C A^{k-1} G with G = AΣCᵀ.
    // Solved here independently by doubling: Σ = Σ_j A^j Q (A^j)ᵀ.

    pub(crate) fn lyapunov_doubling(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let mut sigma = q.clone();
        let mut power = a.clone();
        for _ in 0..64 {
            sigma = &sigma + &power * &sigma * power.transpose();
            power = &power * &power;
            if power.norm() < 1e-300 {
                break;
            }
        }
        sigma
    }

    pub(crate) fn exact_covariances(
        a: &DMatrix<f64>,
        c: &DMatrix<f64>,
        q: &DMatrix<f64>,
        max_lag: usize,
        dt: f64,
    ) -> CovarianceSequence {
        let sigma = lyapunov_doubling(a, q);
        let g = a * &sigma * c.transpose();
        let mut matrices = vec![c * &sigma * c.transpose()];
        let mut a_pow = DMatrix::<f64>::identity(a.nrows(), a.nrows());
        for _k in 1..=max_lag {
            matrices.push(c * &a_pow * &g);
            a_pow = &a_pow * a;
        }
        CovarianceSequence { matrices, dt }
    }

    /// Discrete modal blocks for the oracle, built directly from (f, ξ).
    pub(crate) fn modal_ac(
        modes: &[(f64, f64)],
        shapes: &DMatrix<f64>,
        dt: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = 2 * modes.len();
        let l = shapes.nrows();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut c = DMatrix::<f64>::zeros(l, n);
        for (m, &(f, xi)) in modes.iter().enumerate() {
            let w = 2.0 * PI * f;
            let wd = w * (1.0 - xi * xi).sqrt();
            let rho = (-xi * w * dt).exp();
            let (cs, sn) = ((wd * dt).cos(), (wd * dt).sin());
            a[(2 * m, 2 * m)] = rho * cs;
            a[(2 * m, 2 * m + 1)] = rho * sn;
            a[(2 * m + 1, 2 * m)] = -rho * sn;
            a[(2 * m + 1, 2 * m + 1)] = rho * cs;
            for ch in 0..l {
                c[(ch, 2 * m)] = shapes[(ch, m)];
            }
        }
        (a, c)
    }

    #[test]
    fn exact_toeplitz_has_model_rank() {
        let shapes = DMatrix::from_row_slice(2, 1, &[1.0, 0.6]);
        let (a, c) = modal_ac(&[(1.0, 0.01)], &shapes, 0.01);
        let q = DMatrix::identity(2, 2);
        let cov = exact_covariances(&a, &c, &q, 39, 0.01);
        let t = block_toeplitz(&cov, 20).unwrap();
        let sv = t.svd(false, false).singular_values;
        // Rank 2: third singular value collapses.
        assert!(sv[1] / sv[0] > 1e-6);
        assert!(sv[2] / sv[0] < 1e-10, "sv2/sv0 = {}", sv[2] / sv[0]);
    }

    #[test]
    fn realize_recovers_one_mode_exactly() {
        let shapes = DMatrix::from_row_slice(2, 1, &[1.0, 0.6]);
        let (a, c) = modal_ac(&[(1.0, 0.01)], &shapes, 0.01);
        let q = DMatrix::identity(2, 2);
        let cov = exact_covariances(&a, &c, &q, 39, 0.01);
        let t = block_toeplitz(&cov, 20).unwrap();
        let ss = realize(&t, 2, 2, 20, 0.01).unwrap();
        let modal = poles_to_modal(&ss).unwrap();
        assert_eq!(modal.poles.len(), 1);
        let p = &modal.poles[0];
        assert!((p.freq_hz - 1.0).abs() < 1e-8, "f = {}", p.freq_hz);
        assert!((p.damping - 0.01).abs() < 1e-8, "xi = {}", p.damping);
    }

    #[test]
    fn realize_recovers_two_modes_exactly() {
        let shapes = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.4, 1.0]);
        let truth = [(1.0, 0.01), (1.3, 0.02)];
        let (a, c) = modal_ac(&truth, &shapes, 0.01);
        let q = DMatrix::identity(4, 4);
        let cov = exact_covariances(&a, &c, &q, 59, 0.01);
        let t = block_toeplitz(&cov, 30).unwrap();
        let ss = realize(&t, 4, 2, 30, 0.01).unwrap();
        let modal = poles_to_modal(&ss).unwrap();
        assert_eq!(modal.poles.len(), 2);
        for (pole, &(f, xi)) in modal.poles.iter().zip(&truth) {
            assert!((pole.freq_hz - f).abs() / f < 1e-8, "f = {}", pole.freq_hz);
            assert!((pole.damping - xi).abs() / xi < 1e-8, "xi = {}", pole.damping);
        }
    }

    #[test]
    fn order_zero_is_empty() {
        let t = DMatrix::<f64>::zeros(20, 20);
        let ss = realize(&t, 0, 2, 10, 0.01).unwrap();
        assert_eq!(ss.order, 0);
        assert!(poles_to_modal(&ss).unwrap().poles.is_empty());
    }

    #[test]
    fn hand_constructed_pole_arithmetic() {
        // μ = exp(λ dt) with λ = −0.06283 + 6.28288i, dt = 0.01.
        let lambda = Complex64::new(-0.06283, 6.28288);
        let dt = 0.01;
        let mu = (lambda * dt).exp();
        let a = DMatrix::from_row_slice(2, 2, &[mu.re, mu.im, -mu.im, mu.re]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let ss = StateSpaceRealization {
            a,
            c,
            dt,
            order: 2,
            sv_gap: f64::INFINITY,
        };
        let modal = poles_to_modal(&ss).unwrap();
        assert_eq!(modal.poles.len(), 1);
        let p = &modal.poles[0];
        let f_expected = lambda.norm() / (2.0 * PI);
        let xi_expected = -lambda.re / lambda.norm();
        assert!((p.freq_hz - f_expected).abs() < 1e-9);
        assert!((p.damping - xi_expected).abs() < 1e-9);
        // Rounds to 1.0000 Hz and ξ = 0.0100.
        assert!((p.freq_hz - 1.0).abs() < 5e-5);
        assert!((p.damping - 0.01).abs() < 1e-6);
    }

    #[test]
    fn purely_imaginary_lambda_zero_damping() {
        // μ = i exactly: |μ| = 1, so Re λ = ln(1)/dt = 0 and ξ = 0.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let ss = StateSpaceRealization {
            a,
            c,
            dt: 0.01,
            order: 2,
            sv_gap: f64::INFINITY,
        };
        let modal = poles_to_modal(&ss).unwrap();
        assert_eq!(modal.poles.len(), 1);
        assert_eq!(modal.poles[0].damping, 0.0);
    }

    #[test]
    fn negative_real_pole_discarded_with_count() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.3]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let ss = StateSpaceRealization {
            a,
            c,
            dt: 0.01,
            order: 2,
            sv_gap: f64::INFINITY,
        };
        let modal = poles_to_modal(&ss).unwrap();
        assert!(modal.poles.is_empty());
        assert_eq!(modal.discarded_real, 1);
    }

    fn two_mode_tower(rate: f64) -> crate::sim::TowerModel {
        use crate::data::{ChannelMeta, Component, SensorKind};
        use crate::sim::{ChannelRole, SimChannel};
        let mk = |st: &str, comp, h, idx| SimChannel {
            meta: ChannelMeta::new(st, comp, h, SensorKind::Velocity, 1.0, rate).unwrap(),
            role: ChannelRole::Structural(idx),
        };
        crate::sim::TowerModel {
            modes: vec![
                SimMode { freq_hz: 1.03, damping: 0.01, shape: vec![0.5, 1.0], participation: 1.0 },
                SimMode { freq_hz: 1.28, damping: 0.01, shape: vec![1.0, -0.6], participation: 1.0 },
            ],
            dt: 1.0 / rate,
            output: OutputKind::Velocity,
            channels: vec![
                mk("S943", Component::X, 24.0, 0),
                mk("S945", Component::X, 42.0, 1),
            ],
            noise_rms: vec![0.0, 0.0],
        }
    }

    #[test]
    fn stabilization_two_modes_snr10() {
        let rate = 100.0;
        let mut model = two_mode_tower(rate);
        let exc = [ExcitationSpec::new(ExcitationKind::ModalWhiteNoise { rms: 1.0 }, 5).unwrap()];
        model.noise_rms = calibrate_noise_for_snr(&model, &exc, 3600.0, 10.0, t0()).unwrap();
        let rec = simulate(&model, &exc, 3600.0, 1, t0()).unwrap();
        let y: Vec<Vec<f64>> = rec
            .channels
            .iter()
            .map(|ch| detrend_slice(&ch.segments[0].samples, DetrendMode::Mean))
            .collect();
        let config = SsiConfig {
            block_rows: 60,
            ..SsiConfig::for_rate(rate)
        };
        let diagram = stabilization(&y, 1.0 / rate, &config).unwrap();

        // Stable alignment coverage per true mode over orders >= 4.
        for f_true in [1.03, 1.28] {
            let orders: Vec<usize> = config.orders.iter().copied().filter(|&n| n >= 4).collect();
            let covered = orders
                .iter()
                .filter(|&&n| {
                    diagram.poles.iter().any(|p| {
                        p.pole.order == n
                            && p.flags.all_stable()
                            && (p.pole.freq_hz - f_true).abs() / f_true < 0.01
                    })
                })
                .count();
            let frac = covered as f64 / orders.len() as f64;
            assert!(frac >= 0.8, "mode {f_true} Hz covered at {frac:.2} of orders");
        }

        // Clustering yields exactly the two physical modes.
        let modes = cluster_modes(&diagram, config.distance_cap, config.min_cluster_size());
        assert_eq!(modes.len(), 2, "modes: {:?}", modes.iter().map(|m| m.freq_hz).collect::<Vec<_>>());
        assert!((modes[0].freq_hz - 1.03).abs() / 1.03 < 0.01);
        assert!((modes[1].freq_hz - 1.28).abs() / 1.28 < 0.01);
    }

    #[test]
    fn pure_noise_produces_no_long_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 120_000;
        let y: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| gaussian(&mut rng)).collect())
            .collect();
        let config = SsiConfig {
            block_rows: 30,
            ..SsiConfig::for_rate(100.0)
        };
        let diagram = stabilization(&y, 0.01, &config).unwrap();
        let clusters = cluster_modes(&diagram, config.distance_cap, 1);
        let n_orders = config.orders.len() as f64;
        for c in &clusters {
            assert!(
                (c.cluster_size as f64) <= 0.2 * n_orders,
                "noise alignment of {} poles across {} orders",
                c.cluster_size,
                n_orders
            );
        }
    }

    #[test]
    fn zero_tolerances_no_stable_flags() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..50_000).map(|_| gaussian(&mut rng)).collect())
            .collect();
        let config = SsiConfig {
            block_rows: 20,
            freq_tol: 0.0,
            damping_tol: 0.0,
            mac_min: 1.0,
            ..SsiConfig::for_rate(100.0)
        };
        let diagram = stabilization(&y, 0.01, &config).unwrap();
        assert!(diagram.poles.iter().all(|p| !p.flags.all_stable()));
    }

    #[test]
    fn single_stable_pole_verbatim() {
        let pole = PoleEstimate {
            freq_hz: 2.5,
            damping: 0.015,
            shape: vec![Complex64::new(1.0, 0.0)],
            order: 8,
            window_start: None,
        };
        let diagram = StabilizationDiagram {
            poles: vec![DiagramPole {
                pole: pole.clone(),
                flags: StabilityFlags {
                    has_reference: true,
                    freq_stable: true,
                    damping_stable: true,
                    shape_stable: true,
                },
            }],
            orders: vec![8],
        };
        let modes = cluster_modes(&diagram, 0.02, 1);
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].freq_hz, pole.freq_hz);
        assert_eq!(modes[0].damping, pole.damping);
        assert_eq!(modes[0].cluster_size, 1);
    }

    #[test]
    fn empty_diagram_empty_modes() {
        let diagram = StabilizationDiagram {
            poles: Vec::new(),
            orders: vec![2, 4],
        };
        assert!(cluster_modes(&diagram, 0.02, 1).is_empty());
    }
}
