//! Empirical estimators of the gradient-norm ratio, noise levels, and
//! smoothness constants, plus the period-averaged gradient metric and the
//! closed-form Frank-Wolfe gaps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{fro_norm, inf_norm, l1_norm, nuclear_norm, spectral_norm, LmoBall, Matrix};
use crate::scalar::Scalar;

/// Dual norm used by a noise estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNorm {
    Nuc,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    L2,
    Linf,
}

/// `‖G‖₁ / ‖G‖_nuc`, which lies in `[1, √(mn)]`.
pub fn alpha_ratio<T: Scalar>(g: &Matrix<T>) -> Result<T> {
    if g.is_zero() {
        return Err(Error::ZeroMatrix("alpha_ratio"));
    }
    Ok(l1_norm(g) / nuclear_norm(g))
}

/// `‖G−M‖_nuc / ‖G−M‖_F` or `‖G−M‖₁ / ‖G−M‖_F`.
pub fn noise_level_hat<T: Scalar>(g: &Matrix<T>, m: &Matrix<T>, which: NoiseNorm) -> Result<T> {
    let d = g.sub(m)?;
    if d.is_zero() {
        return invalid("noise_level_hat needs G != M");
    }
    let num = match which {
        NoiseNorm::Nuc => nuclear_norm(&d),
        NoiseNorm::L1 => l1_norm(&d),
    };
    Ok(num / fro_norm(&d))
}

/// `‖dG‖_nuc / ‖dW‖₂` (L2) or `‖dG‖₁ / ‖dW‖_∞` (Linf).
pub fn smoothness_hat<T: Scalar>(dg: &Matrix<T>, dw: &Matrix<T>, which: Smoothness) -> Result<T> {
    dg.ensure_same_shape(dw, "smoothness_hat")?;
    if dw.is_zero() {
        return Err(Error::ZeroMatrix("smoothness_hat"));
    }
    Ok(match which {
        Smoothness::L2 => nuclear_norm(dg) / spectral_norm(dw),
        Smoothness::Linf => l1_norm(dg) / inf_norm(dw),
    })
}

/// `(η_M·g_nuc + η_L·Σ g_l1) / (η_M + (P−1)η_L)` over one period whose first
/// entry is the nuclear norm at the spectral step.
pub fn period_avg_grad_metric(norms: &[f64], eta_m: f64, eta_l: f64, period: u64) -> Result<f64> {
    if period == 0 {
        return invalid("period must be >= 1");
    }
    if norms.len() as u64 != period {
        return Err(Error::LengthMismatch {
            expected: period as usize,
            actual: norms.len(),
        });
    }
    let lion: f64 = norms[1..].iter().sum();
    let weight = eta_m + (period - 1) as f64 * eta_l;
    Ok((eta_m * norms[0] + eta_l * lion) / weight)
}

/// Frank-Wolfe gap over the radius-`1/λ` ball:
/// `max_{‖V‖ ≤ 1/λ} ⟨W − V, grad⟩ = (1/λ)‖grad‖_★ + ⟨W, grad⟩`.
///
/// Negative values are possible when `W` lies outside the ball.
pub fn fw_gap<T: Scalar>(w: &Matrix<T>, grad: &Matrix<T>, lambda: T, ball: LmoBall) -> Result<T> {
    if !(lambda > T::zero()) {
        return invalid("fw_gap needs lambda > 0");
    }
    let dual = match ball {
        LmoBall::Spectral => nuclear_norm(grad),
        LmoBall::InfElem => l1_norm(grad),
    };
    Ok(dual / lambda + w.dot(grad)?)
}

/// Running sample with median and max summaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantileSummary {
    values: Vec<f64>,
}

impl QuantileSummary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        if x.is_finite() {
            self.values.push(x);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }

    pub fn median(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

/// Per-step diagnostic estimates for one matrix parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub step: u64,
    pub alpha_ratio: Option<f64>,
    pub rho_nuc_hat: Option<f64>,
    pub rho_1_hat: Option<f64>,
    #[serde(rename = "L2_hat")]
    pub l2_hat: Option<f64>,
    #[serde(rename = "Linf_hat")]
    pub linf_hat: Option<f64>,
    pub grad_nuc: f64,
    pub grad_l1: f64,
    pub loss: f64,
    pub cumulative_flops: f64,
}

impl DiagRecord {
    /// Computes every estimate that is defined at this step. `prev` holds the
    /// previous gradient and iterate for the smoothness pair.
    pub fn compute<T: Scalar>(
        step: u64,
        grad: &Matrix<T>,
        momentum: &Matrix<T>,
        prev: Option<(&Matrix<T>, &Matrix<T>)>,
        w: &Matrix<T>,
        loss: f64,
        cumulative_flops: f64,
    ) -> Result<Self> {
        let f = |x: T| x.to_f64_lossy();
        let rho = |which| noise_level_hat(grad, momentum, which).ok().map(f);
        let (l2_hat, linf_hat) = match prev {
            Some((g_prev, w_prev)) => {
                let dg = grad.sub(g_prev)?;
                let dw = w.sub(w_prev)?;
                (
                    smoothness_hat(&dg, &dw, Smoothness::L2).ok().map(f),
                    smoothness_hat(&dg, &dw, Smoothness::Linf).ok().map(f),
                )
            }
            None => (None, None),
        };
        Ok(Self {
            step,
            alpha_ratio: alpha_ratio(grad).ok().map(f),
            rho_nuc_hat: rho(NoiseNorm::Nuc),
            rho_1_hat: rho(NoiseNorm::L1),
            l2_hat,
            linf_hat,
            grad_nuc: f(nuclear_norm(grad)),
            grad_l1: f(l1_norm(grad)),
            loss,
            cumulative_flops,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::msign;

    #[test]
    fn alpha_ratio_extremes() {
        assert!((alpha_ratio(&Matrix::<f64>::identity(4)).unwrap() - 1.0).abs() < 1e-12);
        let ones = Matrix::from_fn(3, 5, |_, _| 1.0f64);
        assert!((alpha_ratio(&ones).unwrap() - 15f64.sqrt()).abs() < 1e-12);
        assert!(alpha_ratio(&Matrix::<f64>::zeros(2, 2)).is_err());
    }

    #[test]
    fn noise_levels() {
        let m = Matrix::<f64>::zeros(3, 3);
        let r1 = Matrix::outer(&[1.0, -2.0, 0.5], &[0.3, 1.0, 2.0]);
        assert!((noise_level_hat(&r1, &m, NoiseNorm::Nuc).unwrap() - 1.0).abs() < 1e-12);
        let id = Matrix::<f64>::identity(4);
        assert!((noise_level_hat(&id, &Matrix::zeros(4, 4), NoiseNorm::Nuc).unwrap() - 2.0).abs() < 1e-12);
        assert!(noise_level_hat(&id, &id, NoiseNorm::L1).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let dw = Matrix::<f64>::identity(3);
        let dg = dw.scale(2.5);
        assert!((smoothness_hat(&dg, &dw, Smoothness::L2).unwrap() - 7.5).abs() < 1e-12);
        assert!((smoothness_hat(&dg, &dw, Smoothness::Linf).unwrap() - 7.5).abs() < 1e-12);
        let zero = Matrix::zeros(3, 3);
        assert_eq!(smoothness_hat(&zero, &dw, Smoothness::L2).unwrap(), 0.0);
        assert!(smoothness_hat(&dg, &zero, Smoothness::Linf).is_err());
    }

    #[test]
    fn period_metric_examples() {
        assert_eq!(period_avg_grad_metric(&[4.2], 1.0, 5.0, 1).unwrap(), 4.2);
        assert_eq!(period_avg_grad_metric(&[1.0, 3.0], 2e-3, 2e-3, 2).unwrap(), 2.0);
        let v = period_avg_grad_metric(&[1.0, 50.0], 3e-3, 2e-5, 2).unwrap();
        assert!((v - 4e-3 / 3.02e-3).abs() < 1e-12);
        assert!(period_avg_grad_metric(&[1.0], 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn fw_gap_examples() {
        let g = Matrix::<f64>::identity(2);
        let w = Matrix::zeros(2, 2);
        assert!((fw_gap(&w, &g, 1.0, LmoBall::Spectral).unwrap() - 2.0).abs() < 1e-12);

        let g = Matrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin() + 0.05);
        let lam = 2.0;
        let kkt = msign(&g).unwrap().scale(-1.0 / lam);
        assert!(fw_gap(&kkt, &g, lam, LmoBall::Spectral).unwrap().abs() < 1e-12);
        let w = Matrix::from_fn(3, 3, |i, j| 0.1 * (i as f64 - j as f64));
        let spec = fw_gap(&w, &g, lam, LmoBall::Spectral).unwrap();
        let inf = fw_gap(&w, &g, lam, LmoBall::InfElem).unwrap();
        assert!(spec <= inf);
    }

    #[test]
    fn quantiles() {
        let mut q = QuantileSummary::new();
        assert_eq!(q.median(), None);
        for x in [5.0, 1.0, 3.0, f64::NAN, 9.0] {
            q.push(x);
        }
        assert_eq!(q.len(), 4);
        assert_eq!(q.median(), Some(4.0));
        assert_eq!(q.max(), Some(9.0));
    }
}
