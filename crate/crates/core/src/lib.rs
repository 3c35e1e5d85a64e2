//! Alternating spectral/sign LMO optimizers with the numerical kernels,
//! diagnostics, convergence calculators, FLOP model, and synthetic problems
//! they rely on.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

pub mod diagnostics;
pub mod error;
pub mod flops;
pub mod linalg;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type ParamGroup64 = optim::ParamGroup<f64>;
pub type ParamGroup32 = optim::ParamGroup<f32>;
pub type OptimState64 = optim::OptimState<f64>;
pub type OptimState32 = optim::OptimState<f32>;
