use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{fro_norm, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    None,
    Gaussian,
    StudentT,
}

/// Additive zero-mean gradient noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
    /// Degrees of freedom of the Student-t law.
    pub dof: f64,
    /// Moment order `κ` the noise is meant to have finite.
    pub kappa_target: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            family: NoiseFamily::None,
            scale: 0.0,
            dof: 3.0,
            kappa_target: 2.0,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(scale: f64) -> Self {
        Self {
            family: NoiseFamily::Gaussian,
            scale,
            ..Self::default()
        }
    }

    pub fn student_t(scale: f64, dof: f64, kappa_target: f64) -> Self {
        Self {
            family: NoiseFamily::StudentT,
            scale,
            dof,
            kappa_target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return invalid(format!("noise scale must be >= 0, got {}", self.scale));
        }
        if !(self.kappa_target > 1.0 && self.kappa_target <= 2.0) {
            return invalid(format!(
                "kappa_target must lie in (1, 2], got {}",
                self.kappa_target
            ));
        }
        if self.family == NoiseFamily::StudentT && !(self.dof > 1.0 && self.dof > self.kappa_target) {
            return invalid(format!(
                "student_t needs dof > max(1, kappa_target), got dof = {}",
                self.dof
            ));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.family != NoiseFamily::None && self.scale > 0.0
    }
}

/// Draws an i.i.d. noise matrix; zero for the `none` family or zero scale.
pub fn sample_noise<T: Scalar, R: Rng + ?Sized>(
    noise: &NoiseSpec,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    noise.validate()?;
    if !noise.is_active() {
        return Ok(Matrix::zeros(rows, cols));
    }
    let s = noise.scale;
    let data: Vec<f64> = match noise.family {
        NoiseFamily::None => unreachable!(),
        NoiseFamily::Gaussian => {
            let d = Normal::new(0.0, s).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
            (0..rows * cols).map(|_| d.sample(rng)).collect()
        }
        NoiseFamily::StudentT => {
            let d = StudentT::new(noise.dof).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
            (0..rows * cols).map(|_| s * d.sample(rng)).collect()
        }
    };
    Matrix::new(rows, cols, data.into_iter().map(T::of).collect())
}

/// `σ̂ = (mean ‖D‖_F^κ)^(1/κ)` over the sample deviations.
pub fn estimate_kappa_moment<T: Scalar>(samples: &[Matrix<T>], kappa: f64) -> Result<f64> {
    if samples.is_empty() {
        return invalid("estimate_kappa_moment needs at least one sample");
    }
    if !(kappa > 1.0 && kappa <= 2.0) {
        return invalid(format!("kappa must lie in (1, 2], got {kappa}"));
    }
    let mean = samples
        .iter()
        .map(|d| fro_norm(d).to_f64_lossy().powf(kappa))
        .sum::<f64>()
        / samples.len() as f64;
    Ok(mean.powf(1.0 / kappa))
}
