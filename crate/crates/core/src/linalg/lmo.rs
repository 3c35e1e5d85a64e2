use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{msign, sign_elem, Matrix};
use crate::scalar::Scalar;

/// Primal norm ball for the linear minimization oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmoBall {
    Spectral,
    InfElem,
}

/// `argmin_{‖S‖ ≤ r} ⟨G, S⟩`: `−r·msign(G)` for the spectral ball,
/// `−r·sign(G)` for the element-wise max ball.
pub fn lmo<T: Scalar>(g: &Matrix<T>, ball: LmoBall, radius: T) -> Result<Matrix<T>> {
    if !(radius > T::zero()) {
        return invalid(format!("lmo radius must be positive, got {radius}"));
    }
    let dir = match ball {
        LmoBall::Spectral => msign(g)?,
        LmoBall::InfElem => sign_elem(g),
    };
    Ok(dir.scale(-radius))
}
