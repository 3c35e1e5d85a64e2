use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::linalg::{svd, Matrix};
use crate::scalar::Scalar;

/// I.i.d. standard normal entries.
pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::of(z)
    })
}

/// Random `U diag(s) Vᵀ` with Haar-like orthonormal factors and singular
/// values log-uniform in `[min_ratio, 1]`, the largest pinned to 1.
pub fn conditioned_matrix<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    min_ratio: f64,
    rng: &mut R,
) -> Result<Matrix<T>> {
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return invalid(format!("min_ratio must lie in (0, 1], got {min_ratio}"));
    }
    let k = rows.min(cols);
    let u = svd(&gaussian_matrix::<T, _>(rows, k, rng))?.u;
    let v = svd(&gaussian_matrix::<T, _>(cols, k, rng))?.u;
    let lo = min_ratio.ln();
    let s: Vec<f64> = (0..k)
        .map(|i| if i == 0 { 1.0 } else { (lo * rng.random::<f64>()).exp() })
        .collect();
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        (0..k).fold(T::zero(), |acc, l| acc + u[(i, l)] * T::of(s[l]) * v[(j, l)])
    }))
}
