use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type for matrices, kernels, and optimizer state.
///
/// Implemented for `f32` and `f64`. Tolerances that are tied to the
/// precision of the type live here so generic code never hard-codes an
/// `f64`-only threshold.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Relative off-diagonal threshold for one-sided Jacobi rotations.
    const JACOBI_TOL: f64;

    /// Converts an `f64` constant into this type.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const JACOBI_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const JACOBI_TOL: f64 = 5e-6;
}
