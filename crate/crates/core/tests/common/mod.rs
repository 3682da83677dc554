//! Shared test oracles, independent of the library's identification path.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use ambvib::ssi::CovarianceSequence;

pub fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform01(rng);
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Solves Σ = AΣAᵀ + Q by doubling the geometric series Σ_j A^j Q (A^j)ᵀ.
pub fn lyapunov_doubling(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
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

/// Exact output covariances of the discrete model (A, C) with state noise
/// covariance Q: Λ_0 = CΣCᵀ, Λ_k = C A^{k−1} G, G = AΣCᵀ.
pub fn exact_covariances(
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
    for _ in 1..=max_lag {
        matrices.push(c * &a_pow * &g);
        a_pow = &a_pow * a;
    }
    CovarianceSequence { matrices, dt }
}

/// Block-diagonal discrete (A, C) for a set of (f, ξ) modes with the given
/// (channels × modes) shape matrix, built from rotation-scaling blocks.
pub fn modal_ac(modes: &[(f64, f64)], shapes: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
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
