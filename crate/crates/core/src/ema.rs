//! Experimental modal analysis against a measured input: H1
//! frequency-response estimation and the complex mode indicator function.
//!
//! The base-station channels act as inputs; H1 = S_yx · S_xx⁻¹ is optimal
//! under output noise. CMIF curves are the descending eigenvalues of
//! HᴴH — the squared singular values of H — whose peaks indicate modes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Relative Tikhonov floor added to S_xx before inversion, so near-silent
/// input channels cannot blow up H.
pub const DEFAULT_TIKHONOV_EPS: f64 = 1e-10;

/// Frequency response matrix with per-output multiple coherence.
#[derive(Debug, Clone)]
pub struct FrfMatrix {
    pub freqs: Vec<f64>,
    /// h[k] is the (outputs × inputs) complex FRF at freqs[k].
    pub h: Vec<DMatrix<Complex64>>,
    /// coherence[k][i] ∈ [0, 1] for output i at freqs[k].
    pub coherence: Vec<Vec<f64>>,
    pub resolution: f64,
    pub averaging_count: usize,
}

/// H1 estimation from Welch-averaged cross/auto spectral matrices
/// (Hann window, mean removal per segment).
pub fn frf_h1(
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    rate: f64,
    nfft: usize,
    overlap: f64,
    eps: f64,
) -> Result<FrfMatrix> {
    let m = inputs.len();
    let p = outputs.len();
    if m == 0 || p == 0 {
        return Err(Error::Parameter("need at least one input and one output".into()));
    }
    let n = inputs[0].len();
    if inputs.iter().chain(outputs).any(|c| c.len() != n) {
        return Err(Error::Parameter("channels differ in length".into()));
    }
    if nfft < 2 || nfft > n {
        return Err(Error::Parameter(format!("nfft {nfft} outside 2..={n}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap {overlap} outside [0, 1)")));
    }
    let hop = ((nfft as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let n_avg = if n >= nfft { (n - nfft) / hop + 1 } else { 0 };
    if n_avg < 2 {
        return Err(Error::Parameter(format!(
            "only {n_avg} averages; need at least 2"
        )));
    }

    let window: Vec<f64> = (0..nfft)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / nfft as f64).cos()))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let n_bins = nfft / 2 + 1;

    let spectra = |x: &[f64], start: usize| -> Vec<Complex64> {
        let seg = &x[start..start + nfft];
        let mean = seg.iter().sum::<f64>() / nfft as f64;
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex64::new((v - mean) * w, 0.0))
            .collect();
        fft.process(&mut buf);
        buf.truncate(n_bins);
        buf
    };

    let mut sxx = vec![DMatrix::<Complex64>::zeros(m, m); n_bins];
    let mut syx = vec![DMatrix::<Complex64>::zeros(p, m); n_bins];
    let mut syy = vec![vec![0.0f64; p]; n_bins];
    let mut start = 0usize;
    let mut count = 0usize;
    while start + nfft <= n {
        let x_f: Vec<Vec<Complex64>> = inputs.iter().map(|c| spectra(c, start)).collect();
        let y_f: Vec<Vec<Complex64>> = outputs.iter().map(|c| spectra(c, start)).collect();
        for k in 0..n_bins {
            for a in 0..m {
                for b in 0..m {
                    sxx[k][(a, b)] += x_f[a][k] * x_f[b][k].conj();
                }
            }
            for i in 0..p {
                for b in 0..m {
                    syx[k][(i, b)] += y_f[i][k] * x_f[b][k].conj();
                }
                syy[k][i] += y_f[i][k].norm_sqr();
            }
        }
        count += 1;
        start += hop;
    }

    let mut h = Vec::with_capacity(n_bins);
    let mut coherence = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let trace = sxx[k].diagonal().iter().map(|v| v.re).sum::<f64>();
        let floor = eps * trace / m as f64;
        let mut reg = sxx[k].clone();
        for d in 0..m {
            reg[(d, d)] += Complex64::new(floor, 0.0);
        }
        let inv = reg
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical(format!("singular input spectrum at bin {k}")))?;
        let hk = &syx[k] * inv;
        let mut coh = Vec::with_capacity(p);
        for i in 0..p {
            // Multiple coherence: (H S_yxᴴ)_{ii} / S_yy,ii.
            let mut num = Complex64::new(0.0, 0.0);
            for b in 0..m {
                num += hk[(i, b)] * syx[k][(i, b)].conj();
            }
            let denom = syy[k][i];
            let g = if denom > 0.0 { (num.re / denom).clamp(0.0, 1.0) } else { 0.0 };
            coh.push(g);
        }
        h.push(hk);
        coherence.push(coh);
    }

    let df = rate / nfft as f64;
    Ok(FrfMatrix {
        freqs: (0..n_bins).map(|k| k as f64 * df).collect(),
        h,
        coherence,
        resolution: df,
        averaging_count: count,
    })
}

/// CMIF: descending eigenvalues of HᴴH per frequency line.
#[derive(Debug, Clone)]
pub struct CmifCurves {
    pub freqs: Vec<f64>,
    /// values[k] holds min(outputs, inputs) eigenvalues, descending.
    pub values: Vec<Vec<f64>>,
    pub resolution: f64,
}

impl CmifCurves {
    pub fn n_curves(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Curve `c` over frequency.
    pub fn curve(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

/// Eigenvalues of HᴴH (= squared singular values of H), descending at each
/// frequency line.
pub fn cmif(frf: &FrfMatrix) -> CmifCurves {
    let values = frf
        .h
        .iter()
        .map(|hk| {
            let sv = hk.clone().svd(false, false).singular_values;
            let mut ev: Vec<f64> = sv.iter().map(|s| s * s).collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            ev
        })
        .collect();
    CmifCurves {
        freqs: frf.freqs.clone(),
        values,
        resolution: frf.resolution,
    }
}

/// Topographic prominence of a peak on a log10 curve, in decades.
fn prominence(log_curve: &[f64], peak: usize) -> f64 {
    let h = log_curve[peak];
    let mut base = f64::NEG_INFINITY;
    for side in [-1i64, 1i64] {
        let mut j = peak as i64 + side;
        let mut low = h;
        let mut side_base = None;
        while j >= 0 && (j as usize) < log_curve.len() {
            let v = log_curve[j as usize];
            if v > h {
                side_base = Some(low);
                break;
            }
            low = low.min(v);
            j += side;
        }
        base = base.max(side_base.unwrap_or(low));
    }
    h - base
}

/// Picks modal peaks: local maxima of the first CMIF curve inside `band`
/// exceeding `min_prominence` (log decades), plus coincident peaks of the
/// second curve (repeated roots). Returns (frequency, curve index) sorted
/// by frequency.
pub fn pick_peaks(
    curves: &CmifCurves,
    min_prominence: f64,
    band: (f64, f64),
) -> Result<Vec<(f64, usize)>> {
    if curves.values.is_empty() {
        return Ok(Vec::new());
    }
    let (lo, hi) = band;
    if lo >= hi || hi > *curves.freqs.last().unwrap() {
        return Err(Error::Parameter(format!(
            "band ({lo}, {hi}) outside the frequency grid"
        )));
    }
    let in_band: Vec<usize> = curves
        .freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(k, _)| k)
        .collect();
    if in_band.len() < 3 {
        return Ok(Vec::new());
    }
    let first = *in_band.first().unwrap();
    let last = *in_band.last().unwrap();

    let mut peaks = Vec::new();
    let scan = |curve_index: usize, peaks: &mut Vec<(f64, usize)>| {
        let log_curve: Vec<f64> = curves
            .values
            .iter()
            .map(|v| v[curve_index].max(1e-300).log10())
            .collect();
        for k in (first.max(1))..=(last.min(log_curve.len() - 2)) {
            if log_curve[k] > log_curve[k - 1]
                && log_curve[k] >= log_curve[k + 1]
                && prominence(&log_curve, k) >= min_prominence
            {
                peaks.push((curves.freqs[k], curve_index));
            }
        }
    };
    scan(0, &mut peaks);
    if curves.n_curves() > 1 {
        // Second-curve peaks coinciding with a first-curve peak flag a
        // repeated root.
        let mut second = Vec::new();
        scan(1, &mut second);
        for (f, _) in second {
            if peaks
                .iter()
                .any(|&(f0, c)| c == 0 && (f0 - f).abs() <= curves.resolution)
            {
                peaks.push((f, 1));
            }
        }
    }
    peaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(peaks)
}
