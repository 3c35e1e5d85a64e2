use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{fro_norm, svd, Matrix};
use crate::scalar::Scalar;

/// Relative cutoff below which singular directions are dropped by [`msign`].
pub const MSIGN_RANK_TOL: f64 = 1e-12;

/// Pre-normalization inflation applied before Newton-Schulz so that `σ₁ < 1`.
pub const NS_NORM_EPS: f64 = 1e-7;

/// Element-wise sign with `sign(0) = 0`.
pub fn sign_elem<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| {
        if v > T::zero() {
            T::one()
        } else if v < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    })
}

/// Exact matrix sign `U Vᵀ` through the SVD, restricted to singular values
/// above `1e-12·σ₁`. `msign(0) = 0`.
pub fn msign<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let r = svd(x)?;
    let (m, n) = x.shape();
    let mut out = Matrix::zeros(m, n);
    let s1 = r.s[0];
    if s1.is_zero() {
        return Ok(out);
    }
    let cutoff = s1 * T::of(MSIGN_RANK_TOL);
    let keep = r.s.iter().take_while(|&&s| s > cutoff).count();
    for i in 0..m {
        for j in 0..n {
            out[(i, j)] = (0..keep).fold(T::zero(), |acc, l| acc + r.u[(i, l)] * r.v[(j, l)]);
        }
    }
    Ok(out)
}

/// Odd matrix polynomial `X ← aX + b(XXᵀ)X + c(XXᵀ)²X` used by Newton-Schulz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsPreset {
    pub name: String,
    pub coefficients: (f64, f64, f64),
    pub default_iterations: usize,
}

impl NsPreset {
    pub const CUBIC_EXACT: &'static str = "cubic-exact";
    pub const MUON_QUINTIC: &'static str = "muon-quintic";

    /// Classical cubic iteration `1.5X − 0.5XXᵀX`; converges to `msign`.
    pub fn cubic_exact() -> Self {
        Self {
            name: Self::CUBIC_EXACT.into(),
            coefficients: (1.5, -0.5, 0.0),
            default_iterations: 30,
        }
    }

    /// The widely used Muon quintic; fast but only approximately orthogonal.
    pub fn muon_quintic() -> Self {
        Self {
            name: Self::MUON_QUINTIC.into(),
            coefficients: (3.4445, -4.7750, 2.0315),
            default_iterations: 5,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            Self::CUBIC_EXACT => Some(Self::cubic_exact()),
            Self::MUON_QUINTIC => Some(Self::muon_quintic()),
            _ => None,
        }
    }

    /// The scalar polynomial applied to each singular value.
    pub fn poly(&self, s: f64) -> f64 {
        let (a, b, c) = self.coefficients;
        a * s + b * s.powi(3) + c * s.powi(5)
    }
}

impl Default for NsPreset {
    fn default() -> Self {
        Self::muon_quintic()
    }
}

/// Newton-Schulz approximation of `msign(X)` with `iterations` steps.
///
/// The input is scaled by `1 / (‖X‖_F (1 + 1e-7))`; tall inputs are processed
/// transposed so the Gram matrix is the smaller square.
pub fn newton_schulz<T: Scalar>(
    x: &Matrix<T>,
    preset: &NsPreset,
    iterations: usize,
) -> Result<Matrix<T>> {
    if iterations == 0 {
        return invalid("newton_schulz needs at least one iteration");
    }
    let norm = fro_norm(x);
    if norm.is_zero() {
        return Err(Error::ZeroMatrix("newton_schulz"));
    }
    let tall = x.rows() > x.cols();
    let mut y = if tall { x.transpose() } else { x.clone() };
    y.scale_in_place(T::one() / (norm * T::of(1.0 + NS_NORM_EPS)));

    let (a, b, c) = preset.coefficients;
    let (a, b, c) = (T::of(a), T::of(b), T::of(c));
    for _ in 0..iterations {
        let gram = y.gram_rows();
        // B = b·A + c·A²
        let mut poly = gram.scale(b);
        if !c.is_zero() {
            poly.axpy(c, &gram.matmul(&gram)?)?;
        }
        let by = poly.matmul(&y)?;
        y.scale_in_place(a);
        y.axpy(T::one(), &by)?;
    }
    Ok(if tall { y.transpose() } else { y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    #[test]
    fn sign_elem_cases() {
        let x = Matrix::from_rows(&[[0.5, -2.0], [0.0, 7.0]]).unwrap();
        let s = sign_elem(&x);
        assert_eq!(s, Matrix::from_rows(&[[1.0, -1.0], [0.0, 1.0]]).unwrap());
        assert_eq!(sign_elem(&x.scale(3.5)), s);
        assert_eq!(crate::linalg::inf_norm(&s), 1.0);
    }

    #[test]
    fn msign_of_diagonal_is_element_sign() {
        let x = Matrix::from_diag(&[2.0, -3.0]);
        let m = msign(&x).unwrap();
        assert!(m.max_abs_diff(&Matrix::from_diag(&[1.0, -1.0])).unwrap() < 1e-15);
    }

    #[test]
    fn msign_of_zero_is_zero() {
        let z = Matrix::<f64>::zeros(3, 2);
        assert!(msign(&z).unwrap().is_zero());
    }

    #[test]
    fn msign_drops_null_directions() {
        let x = Matrix::<f64>::outer(&[1.0, 1.0, 0.0], &[2.0, 0.0]);
        let sv = singular_values(&msign(&x).unwrap());
        assert!((sv[0] - 1.0).abs() < 1e-12);
        assert!(sv[1].abs() < 1e-12);
    }

    #[test]
    fn cubic_ns_on_diagonal() {
        let x = Matrix::from_diag(&[2.0, -3.0]);
        let y = newton_schulz(&x, &NsPreset::cubic_exact(), 30).unwrap();
        assert!(y.max_abs_diff(&Matrix::from_diag(&[1.0, -1.0])).unwrap() < 1e-6);
    }

    #[test]
    fn ns_rejects_zero_and_zero_iterations() {
        let z = Matrix::<f64>::zeros(2, 2);
        assert_eq!(
            newton_schulz(&z, &NsPreset::muon_quintic(), 5).unwrap_err(),
            Error::ZeroMatrix("newton_schulz")
        );
        assert!(newton_schulz(&Matrix::<f64>::identity(2), &NsPreset::muon_quintic(), 0).is_err());
    }

    #[test]
    fn ns_tall_and_wide_agree_under_transpose() {
        let x = Matrix::from_fn(5, 3, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let p = NsPreset::muon_quintic();
        let tall = newton_schulz(&x, &p, 5).unwrap();
        let wide = newton_schulz(&x.transpose(), &p, 5).unwrap();
        assert!(tall.max_abs_diff(&wide.transpose()).unwrap() < 1e-14);
    }

    #[test]
    fn ns_scale_invariance_is_exact_for_powers_of_four() {
        let x = Matrix::from_fn(4, 6, |i, j| ((i * 5 + j * 3) % 9) as f64 - 4.0 + 0.25);
        let p = NsPreset::muon_quintic();
        let base = newton_schulz(&x, &p, 5).unwrap();
        for c in [4.0, 1024.0, 1.0 / 16.0] {
            assert_eq!(newton_schulz(&x.scale(c), &p, 5).unwrap(), base);
        }
        for c in [1e-3, 1e3, 0.7] {
            assert!(newton_schulz(&x.scale(c), &p, 5).unwrap().max_abs_diff(&base).unwrap() < 1e-13);
        }
    }

    #[test]
    fn ns_works_in_single_precision() {
        let x = Matrix::<f32>::from_diag(&[2.0, -3.0, 0.5]);
        let y = newton_schulz(&x, &NsPreset::cubic_exact(), 30).unwrap();
        assert!(y.max_abs_diff(&Matrix::from_diag(&[1.0, -1.0, 1.0])).unwrap() < 1e-5);
    }
}
