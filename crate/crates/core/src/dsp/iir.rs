//! Butterworth IIR filters realized as cascaded second-order sections.
//!
//! Design path: analog Butterworth prototype → frequency transform
//! (lowpass/highpass/bandpass) → bilinear transform with prewarping →
//! conjugate-pair pole grouping into biquads. A single high-order
//! polynomial would lose the extreme low corners (0.04 Hz on 100 sps
//! data) to coefficient rounding; sections keep every corner stable.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Filter shape and corner frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
}

impl FilterKind {
    /// Lowest corner frequency; sets transient time scale.
    pub fn low_corner(&self) -> f64 {
        match *self {
            FilterKind::Lowpass(f) => f,
            FilterKind::Highpass(f) => f,
            FilterKind::Bandpass(lo, _) => lo,
        }
    }
}

/// One second-order section, denominator normalized to `a0 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// DC gain of the section.
    fn gain_at_unity(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Steady-state internal state for a constant input `x0`
    /// (direct form II transposed).
    fn step_state(&self, x0: f64) -> [f64; 2] {
        let h1 = if (1.0 + self.a1 + self.a2).abs() > 1e-300 {
            self.gain_at_unity()
        } else {
            0.0
        };
        let y = h1 * x0;
        [
            (self.b1 + self.b2) * x0 - (self.a1 + self.a2) * y,
            self.b2 * x0 - self.a2 * y,
        ]
    }
}

/// A cascade of biquads; the overall gain is folded into the sections.
#[derive(Debug, Clone)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    kind: FilterKind,
    rate: f64,
}

impl Sos {
    /// Causal single-pass filtering with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let mut z1 = 0.0;
            let mut z2 = 0.0;
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * out + z2;
                z2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
        }
        y
    }

    fn filter_with_step_init(&self, x: &mut [f64]) {
        for s in &self.sections {
            let [mut z1, mut z2] = s.step_state(x.first().copied().unwrap_or(0.0));
            for v in x.iter_mut() {
                let xin = *v;
                let out = s.b0 * xin + z1;
                z1 = s.b1 * xin - s.a1 * out + z2;
                z2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
        }
    }

    /// Forward–backward filtering: zero phase, squared magnitude response
    /// (the effective order doubles). Edges are odd-reflected over three
    /// filter time constants to suppress startup transients.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let tau_samples = self.rate / (2.0 * PI * self.kind.low_corner());
        let pad = ((3.0 * tau_samples).ceil() as usize).min(x.len().saturating_sub(1));
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in 0..pad {
            ext.push(2.0 * x[0] - x[pad - i]);
        }
        ext.extend_from_slice(x);
        for i in 0..pad {
            ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
        }
        self.filter_with_step_init(&mut ext);
        ext.reverse();
        self.filter_with_step_init(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Designs a Butterworth filter as cascaded biquads.
///
/// `order` is the analog prototype order (1..=8); a bandpass of order `n`
/// has `2n` poles. Corners must lie strictly inside (0, rate/2).
pub fn design_butterworth(kind: FilterKind, order: usize, rate: f64) -> Result<Sos> {
    if !(1..=8).contains(&order) {
        return Err(Error::Parameter(format!("filter order {order} outside 1..=8")));
    }
    let nyquist = rate / 2.0;
    let check = |f: f64| -> Result<f64> {
        if f <= 0.0 || f >= nyquist {
            return Err(Error::Parameter(format!(
                "cutoff {f} Hz outside (0, {nyquist}) at rate {rate}"
            )));
        }
        Ok(2.0 * rate * (PI * f / rate).tan())
    };

    // Analog Butterworth prototype: unit-circle poles, no finite zeros.
    let proto: Vec<Complex64> = (0..order)
        .map(|k| Complex64::from_polar(1.0, PI * (2 * k + order + 1) as f64 / (2 * order) as f64))
        .collect();

    let (a_zeros, a_poles, a_gain) = match kind {
        FilterKind::Lowpass(fc) => {
            let wc = check(fc)?;
            let poles: Vec<Complex64> = proto.iter().map(|p| p * wc).collect();
            (Vec::new(), poles, wc.powi(order as i32))
        }
        FilterKind::Highpass(fc) => {
            let wc = check(fc)?;
            let poles: Vec<Complex64> = proto.iter().map(|p| wc / p).collect();
            let zeros = vec![Complex64::new(0.0, 0.0); order];
            // Butterworth prototype pole product has unit magnitude.
            (zeros, poles, 1.0)
        }
        FilterKind::Bandpass(lo, hi) => {
            if lo >= hi {
                return Err(Error::Parameter(format!("bandpass corners out of order: {lo} >= {hi}")));
            }
            let w1 = check(lo)?;
            let w2 = check(hi)?;
            let bw = w2 - w1;
            let wo2 = w1 * w2;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let s = p * (bw / 2.0);
                let disc = (s * s - wo2).sqrt();
                poles.push(s + disc);
                poles.push(s - disc);
            }
            let zeros = vec![Complex64::new(0.0, 0.0); order];
            (zeros, poles, bw.powi(order as i32))
        }
    };

    // Bilinear transform; remaining zeros land at z = -1.
    let fs2 = Complex64::new(2.0 * rate, 0.0);
    let d_poles: Vec<Complex64> = a_poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let mut num = Complex64::new(1.0, 0.0);
    for z in &a_zeros {
        num *= fs2 - z;
    }
    let mut den = Complex64::new(1.0, 0.0);
    for p in &a_poles {
        den *= fs2 - p;
    }
    let k_digital = a_gain * (num / den).re;

    let sections = pair_into_sections(kind, &d_poles, k_digital)?;
    Ok(Sos {
        sections,
        kind,
        rate,
    })
}

/// Groups digital poles into conjugate-pair biquads and attaches the
/// structurally known Butterworth zeros (±1 on the unit circle).
fn pair_into_sections(kind: FilterKind, poles: &[Complex64], gain: f64) -> Result<Vec<Biquad>> {
    let mut complex: Vec<Complex64> = poles.iter().filter(|p| p.im > 1e-12).copied().collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= 1e-12)
        .map(|p| p.re)
        .collect();
    // Deterministic order: slowest (closest to z=1) sections last.
    complex.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n_sections = complex.len() + real.len().div_ceil(2);
    let mut denominators: Vec<(f64, f64, bool)> = Vec::with_capacity(n_sections);
    for p in &complex {
        denominators.push((-2.0 * p.re, p.norm_sqr(), false));
    }
    let mut it = real.chunks_exact(2);
    for pair in it.by_ref() {
        denominators.push((-(pair[0] + pair[1]), pair[0] * pair[1], false));
    }
    if let [p] = it.remainder() {
        denominators.push((-p, 0.0, true));
    }

    let section_gain = gain.powf(1.0 / n_sections as f64);
    if !section_gain.is_finite() {
        return Err(Error::Numerical(format!("non-finite filter gain {gain}")));
    }
    let sections = denominators
        .into_iter()
        .map(|(a1, a2, first_order)| {
            let g = section_gain;
            let (b0, b1, b2) = match (kind, first_order) {
                (FilterKind::Lowpass(_), false) => (g, 2.0 * g, g),
                (FilterKind::Lowpass(_), true) => (g, g, 0.0),
                (FilterKind::Highpass(_), false) => (g, -2.0 * g, g),
                (FilterKind::Highpass(_), true) => (g, -g, 0.0),
                (FilterKind::Bandpass(..), false) => (g, 0.0, -g),
                (FilterKind::Bandpass(..), true) => (g, -g, 0.0),
            };
            Biquad { b0, b1, b2, a1, a2 }
        })
        .collect();
    Ok(sections)
}
