//! Dense matrix kernels: norms, SVD, element-wise and matrix sign,
//! Newton-Schulz, power iteration, stable rank, and the two LMO maps.

mod lmo;
mod matrix;
mod norms;
mod power;
mod random;
mod sign;
mod svd;

pub use lmo::{lmo, LmoBall};
pub use matrix::Matrix;
pub use norms::{fro_norm, inf_norm, l1_norm, matrix_norm, nuclear_norm, spectral_norm, Norm};
pub use power::{power_iter_sigma1, stable_rank, DEFAULT_POWER_ITERS};
pub use random::{conditioned_matrix, gaussian_matrix};
pub use sign::{msign, newton_schulz, sign_elem, NsPreset, MSIGN_RANK_TOL, NS_NORM_EPS};
pub use svd::{singular_values, svd, svd_with, JacobiOptions, SvdResult};
