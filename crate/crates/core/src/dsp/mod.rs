//! Deterministic signal conditioning: detrending, IIR filtering,
//! decimation, Welch power spectra and spectrograms.

mod iir;

pub use iir::{design_butterworth, Biquad, FilterKind, Sos};

use chrono::{DateTime, Duration, Utc};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::data::TimeSeriesSegment;
use crate::{Error, Result};

/// Detrending mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetrendMode {
    /// Remove the sample mean.
    Mean,
    /// Remove the least-squares straight line.
    Linear,
}

/// Spectral window for Welch averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralWindow {
    Hann,
    Rect,
}

/// One-sided power spectral density.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    /// Power density in (unit)²/Hz.
    pub power: Vec<f64>,
    /// Frequency grid spacing, Hz.
    pub resolution: f64,
    /// Number of averaged segments.
    pub averaging_count: usize,
}

impl Spectrum {
    /// Trapezoid-free integral Σ power·Δf (equals signal variance by Parseval).
    pub fn integrated_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution
    }
}

/// Time–frequency power matrix; row `t` is the spectrum of the slice
/// starting at `times[t]`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub times: Vec<DateTime<Utc>>,
    pub freqs: Vec<f64>,
    pub power: Vec<Vec<f64>>,
}

pub fn detrend_slice(x: &[f64], mode: DetrendMode) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    match mode {
        DetrendMode::Mean => {
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter().map(|v| v - mean).collect()
        }
        DetrendMode::Linear => {
            let (slope, intercept) = linear_fit(x);
            x.iter()
                .enumerate()
                .map(|(k, v)| v - (slope * k as f64 + intercept))
                .collect()
        }
    }
}

/// Least-squares line through (k, x[k]); returns (slope, intercept).
pub fn linear_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sum_k = n * (n - 1.0) / 2.0;
    let sum_kk = n * (n - 1.0) * (2.0 * n - 1.0) / 6.0;
    let sum_y: f64 = x.iter().sum();
    let sum_ky: f64 = x.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let denom = n * sum_kk - sum_k * sum_k;
    if denom.abs() < f64::EPSILON {
        return (0.0, sum_y / n);
    }
    let slope = (n * sum_ky - sum_k * sum_y) / denom;
    (slope, (sum_y - slope * sum_k) / n)
}

/// Removes the mean or the best-fit line from a segment.
pub fn detrend(x: &TimeSeriesSegment, mode: DetrendMode) -> TimeSeriesSegment {
    TimeSeriesSegment {
        start: x.start,
        rate: x.rate,
        unit: x.unit,
        samples: detrend_slice(&x.samples, mode),
    }
}

/// Butterworth filtering of a segment. `zero_phase` runs forward–backward,
/// doubling the effective order and squaring the magnitude response.
pub fn iir_filter(
    x: &TimeSeriesSegment,
    kind: FilterKind,
    order: usize,
    zero_phase: bool,
) -> Result<TimeSeriesSegment> {
    let sos = design_butterworth(kind, order, x.rate)?;
    let samples = if zero_phase {
        sos.filtfilt(&x.samples)
    } else {
        sos.filter(&x.samples)
    };
    Ok(TimeSeriesSegment {
        start: x.start,
        rate: x.rate,
        unit: x.unit,
        samples,
    })
}

/// Anti-aliased decimation: zero-phase order-4 Butterworth at 0.4× the new
/// rate, then every `factor`-th sample. The squared (forward–backward)
/// response gives > 40 dB at 1.5× the new Nyquist.
pub fn decimate(x: &TimeSeriesSegment, factor: usize) -> Result<TimeSeriesSegment> {
    if factor < 2 {
        return Err(Error::Parameter(format!("decimation factor {factor} < 2")));
    }
    let new_rate = x.rate / factor as f64;
    let sos = design_butterworth(FilterKind::Lowpass(0.4 * new_rate), 4, x.rate)?;
    let filtered = sos.filtfilt(&x.samples);
    let samples: Vec<f64> = filtered.iter().step_by(factor).copied().collect();
    Ok(TimeSeriesSegment {
        start: x.start,
        rate: new_rate,
        unit: x.unit,
        samples,
    })
}

fn window_samples(window: SpectralWindow, n: usize) -> Vec<f64> {
    match window {
        SpectralWindow::Rect => vec![1.0; n],
        SpectralWindow::Hann => (0..n)
            .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
            .collect(),
    }
}

/// Welch PSD on a raw slice. Segments are mean-removed and windowed;
/// the one-sided density satisfies Parseval (Σ power·Δf ≈ variance).
pub fn welch_on_slice(
    x: &[f64],
    rate: f64,
    nfft: usize,
    overlap: f64,
    window: SpectralWindow,
) -> Result<Spectrum> {
    if nfft < 2 || nfft > x.len() {
        return Err(Error::Parameter(format!(
            "nfft {nfft} outside 2..={}",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap {overlap} outside [0, 1)")));
    }
    let hop = ((nfft as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let w = window_samples(window, nfft);
    let u: f64 = w.iter().map(|v| v * v).sum();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let n_bins = nfft / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + nfft <= x.len() {
        let seg = &x[start..start + nfft];
        let mean = seg.iter().sum::<f64>() / nfft as f64;
        for (k, (v, wk)) in seg.iter().zip(&w).enumerate() {
            buf[k] = Complex64::new((v - mean) * wk, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * rate * u);
    let mut power: Vec<f64> = acc.iter().map(|p| p * scale).collect();
    for (k, p) in power.iter_mut().enumerate() {
        if k != 0 && !(nfft.is_multiple_of(2) && k == nfft / 2) {
            *p *= 2.0;
        }
    }
    let df = rate / nfft as f64;
    Ok(Spectrum {
        freqs: (0..n_bins).map(|k| k as f64 * df).collect(),
        power,
        resolution: df,
        averaging_count: count,
    })
}

/// Welch PSD of a segment.
pub fn psd_welch(
    x: &TimeSeriesSegment,
    nfft: usize,
    overlap: f64,
    window: SpectralWindow,
) -> Result<Spectrum> {
    welch_on_slice(&x.samples, x.rate, nfft, overlap, window)
}

/// Short-time spectrogram: one Hann periodogram per hop.
pub fn spectrogram(x: &TimeSeriesSegment, nfft: usize, hop: usize) -> Result<Spectrogram> {
    if nfft > x.len() {
        return Err(Error::Parameter(format!(
            "nfft {nfft} exceeds segment length {}",
            x.len()
        )));
    }
    if hop == 0 {
        return Err(Error::Parameter("hop must be positive".into()));
    }
    let mut times = Vec::new();
    let mut power = Vec::new();
    let mut freqs = Vec::new();
    let mut start = 0usize;
    while start + nfft <= x.len() {
        let spec = welch_on_slice(
            &x.samples[start..start + nfft],
            x.rate,
            nfft,
            0.0,
            SpectralWindow::Hann,
        )?;
        if freqs.is_empty() {
            freqs = spec.freqs;
        }
        times.push(x.start + Duration::nanoseconds(start as i64 * super::data::dt_nanos(x.rate)));
        power.push(spec.power);
        start += hop;
    }
    Ok(Spectrogram {
        times,
        freqs,
        power,
    })
}
