use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::Scalar;

/// Default power-iteration count for `σ₁` estimates.
pub const DEFAULT_POWER_ITERS: usize = 20;

fn unit<T: Scalar>(v: &mut [T]) -> T {
    let n = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
    n
}

/// Power-iteration estimate of the largest singular value.
///
/// Iterates on `XᵀX` from a seeded pseudo-random unit vector and returns
/// `‖X v‖` for the final unit vector `v`, which is a lower bound on `σ₁`
/// up to rounding.
pub fn power_iter_sigma1<T: Scalar>(x: &Matrix<T>, iters: usize, seed: u64) -> T {
    let mut r = rng::stream(seed, &[0x5017_u64]);
    let mut v: Vec<T> = (0..x.cols())
        .map(|_| T::of(r.random::<f64>() * 2.0 - 1.0))
        .collect();
    if unit(&mut v).is_zero() {
        v[0] = T::one();
    }
    for _ in 0..iters.max(1) {
        let u = x.matvec(&v);
        let mut w = x.t_matvec(&u);
        if unit(&mut w).is_zero() {
            return T::zero();
        }
        v = w;
    }
    let xv = x.matvec(&v);
    xv.iter().fold(T::zero(), |acc, &a| acc + a * a).sqrt()
}

/// `‖X‖_F² / σ̂₁²`.
pub fn stable_rank<T: Scalar>(x: &Matrix<T>, sigma1_hat: T) -> Result<T> {
    if !(sigma1_hat > T::zero()) {
        return invalid(format!("stable_rank needs sigma1_hat > 0, got {sigma1_hat}"));
    }
    let sq: T = x.as_slice().iter().map(|&a| a * a).sum();
    Ok(sq / (sigma1_hat * sigma1_hat))
}
