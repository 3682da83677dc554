//! Complex eigenpairs of a real matrix: eigenvalues from the real Schur
//! form (Hessenberg reduction + QR iteration), eigenvectors by shifted
//! inverse iteration on the complexified matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub struct EigenPair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
}

/// Full complex eigendecomposition. Fails when the matrix is (numerically)
/// defective: two coincident eigenvalues sharing one eigenvector direction.
pub fn complex_eigenpairs(a: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let values = a.clone().complex_eigenvalues();
    let a_c = a.map(|v| Complex64::new(v, 0.0));
    let scale = a.norm().max(1e-300);

    let mut pairs = Vec::with_capacity(n);
    for (j, &mu) in values.iter().enumerate() {
        let vector = inverse_iteration(&a_c, mu, scale, j)?;
        pairs.push(EigenPair { value: mu, vector });
    }

    // A repeated eigenvalue with collinear eigenvectors means a Jordan
    // block; the modal decomposition does not exist then.
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            if (pairs[i].value - pairs[j].value).norm() < 1e-10 * scale {
                let dot = pairs[i]
                    .vector
                    .dotc(&pairs[j].vector)
                    .norm();
                if dot > 1.0 - 1e-8 {
                    return Err(Error::Numerical(
                        "matrix is defective: repeated eigenvalue without independent eigenvectors"
                            .into(),
                    ));
                }
            }
        }
    }
    Ok(pairs)
}

fn inverse_iteration(
    a_c: &DMatrix<Complex64>,
    mu: Complex64,
    scale: f64,
    index: usize,
) -> Result<DVector<Complex64>> {
    let n = a_c.nrows();
    let mut delta = 1e-10 * (mu.norm() + scale * 1e-3);
    for _attempt in 0..4 {
        let shifted = a_c - DMatrix::<Complex64>::identity(n, n) * (mu + Complex64::new(delta, 0.0));
        let lu = shifted.lu();
        // Deterministic, index-dependent start vector.
        let mut v = DVector::from_fn(n, |i, _| {
            Complex64::new(
                1.0 + ((i * 7 + index * 13) % 17) as f64 * 1e-3,
                ((i * 3 + index * 5) % 13) as f64 * 1e-3,
            )
        });
        v /= Complex64::new(v.norm(), 0.0);
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&v) {
                Some(w) => {
                    let norm = w.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w / Complex64::new(norm, 0.0);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let residual = (a_c * &v - &v * mu).norm();
            if residual <= 1e-6 * scale {
                return Ok(v);
            }
        }
        delta *= 1e3;
    }
    Err(Error::Numerical(format!(
        "inverse iteration failed for eigenvalue {mu}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_block_eigenpairs() {
        let theta = 0.3f64;
        let a = DMatrix::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()]);
        let pairs = complex_eigenpairs(&a).unwrap();
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert!((p.value.norm() - 1.0).abs() < 1e-12);
            assert!((p.value.arg().abs() - theta).abs() < 1e-12);
            let r = (&a.map(|v| Complex64::new(v, 0.0)) * &p.vector - &p.vector * p.value).norm();
            assert!(r < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn diagonal_matrix_unit_vectors() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 0.5]));
        let pairs = complex_eigenpairs(&a).unwrap();
        let mut values: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        values.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((values[0] + 1.0).abs() < 1e-12);
        assert!((values[1] - 0.5).abs() < 1e-12);
        assert!((values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jordan_block_detected_as_defective() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(complex_eigenpairs(&a).is_err());
    }

    #[test]
    fn empty_matrix() {
        let a = DMatrix::<f64>::zeros(0, 0);
        assert!(complex_eigenpairs(&a).unwrap().is_empty());
    }
}
