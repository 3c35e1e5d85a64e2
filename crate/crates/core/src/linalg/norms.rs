use serde::{Deserialize, Serialize};

use crate::linalg::{singular_values, Matrix};
use crate::scalar::Scalar;

/// The five matrix norms used throughout: Frobenius, element-wise max,
/// element-wise sum, spectral (`σ₁`), and nuclear (`Σσ_k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Fro,
    InfElem,
    L1Elem,
    Spectral,
    Nuclear,
}

pub fn matrix_norm<T: Scalar>(x: &Matrix<T>, which: Norm) -> T {
    match which {
        Norm::Fro => fro_norm(x),
        Norm::InfElem => inf_norm(x),
        Norm::L1Elem => l1_norm(x),
        Norm::Spectral => singular_values(x)[0],
        Norm::Nuclear => nuclear_norm(x),
    }
}

/// Scaled by the largest entry so that finite inputs never overflow.
pub fn fro_norm<T: Scalar>(x: &Matrix<T>) -> T {
    let scale = inf_norm(x);
    if scale.is_zero() || !scale.is_finite() {
        return scale;
    }
    let sum = x.as_slice().iter().fold(T::zero(), |acc, &v| {
        let r = v / scale;
        acc + r * r
    });
    scale * sum.sqrt()
}

pub fn inf_norm<T: Scalar>(x: &Matrix<T>) -> T {
    x.as_slice().iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
}

pub fn l1_norm<T: Scalar>(x: &Matrix<T>) -> T {
    x.as_slice().iter().fold(T::zero(), |acc, &v| acc + v.abs())
}

pub fn nuclear_norm<T: Scalar>(x: &Matrix<T>) -> T {
    singular_values(x).into_iter().sum()
}

pub fn spectral_norm<T: Scalar>(x: &Matrix<T>) -> T {
    singular_values(x)[0]
}
