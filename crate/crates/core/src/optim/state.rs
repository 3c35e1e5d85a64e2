use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Matrix2d,
    /// Stored as a `1 x n` matrix; updated by the AdamW fallback.
    Vector1d,
}

/// A named parameter with its current gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup<T> {
    pub id: String,
    pub kind: ParamKind,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Scalar> ParamGroup<T> {
    pub fn matrix(id: impl Into<String>, value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            id: id.into(),
            kind: ParamKind::Matrix2d,
            value,
            grad,
        }
    }

    pub fn vector(id: impl Into<String>, values: Vec<T>) -> Result<Self> {
        let n = values.len();
        let value = Matrix::new(1, n, values)?;
        Ok(Self {
            id: id.into(),
            kind: ParamKind::Vector1d,
            value,
            grad: Matrix::zeros(1, n),
        })
    }

    pub fn check(&self) -> Result<()> {
        self.value.ensure_same_shape(&self.grad, "param grad")?;
        if self.kind == ParamKind::Vector1d && self.value.rows() != 1 {
            return invalid(format!("vector param {} must be stored as 1 x n", self.id));
        }
        Ok(())
    }
}

/// Branch taken by a matrix parameter on one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Muon,
    Lion,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Muon => "muon",
            Self::Lion => "lion",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SlotState<T> {
    Momentum(Matrix<T>),
    Adam { m: Matrix<T>, v: Matrix<T>, t: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Slot<T> {
    pub(crate) id: String,
    pub(crate) kind: ParamKind,
    pub(crate) shape: (usize, usize),
    pub(crate) state: SlotState<T>,
}

/// Optimizer state: the step counter plus one buffer per matrix parameter
/// and the AdamW moments of each vector parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<T> {
    pub(crate) t: u64,
    pub(crate) slots: Vec<Slot<T>>,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(params: &[ParamGroup<T>]) -> Result<Self> {
        let mut slots = Vec::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            p.check()?;
            if params[..i].iter().any(|q| q.id == p.id) {
                return invalid(format!("duplicate param id {:?}", p.id));
            }
            let (r, c) = p.value.shape();
            let state = match p.kind {
                ParamKind::Matrix2d => SlotState::Momentum(Matrix::zeros(r, c)),
                ParamKind::Vector1d => SlotState::Adam {
                    m: Matrix::zeros(r, c),
                    v: Matrix::zeros(r, c),
                    t: 0,
                },
            };
            slots.push(Slot {
                id: p.id.clone(),
                kind: p.kind,
                shape: (r, c),
                state,
            });
        }
        Ok(Self { t: 0, slots })
    }

    /// Number of completed steps.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn momentum_buffer_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s.state, SlotState::Momentum(_)))
            .count()
    }

    pub fn momentum(&self, id: &str) -> Option<&Matrix<T>> {
        self.slots.iter().find(|s| s.id == id).and_then(|s| match &s.state {
            SlotState::Momentum(m) => Some(m),
            SlotState::Adam { .. } => None,
        })
    }

    pub(crate) fn check_params(&self, params: &[ParamGroup<T>]) -> Result<()> {
        if params.len() != self.slots.len() {
            return invalid(format!(
                "optimizer state holds {} params, step received {}",
                self.slots.len(),
                params.len()
            ));
        }
        for (slot, p) in self.slots.iter().zip(params) {
            if slot.id != p.id || slot.kind != p.kind {
                return invalid(format!(
                    "param {:?} does not match state slot {:?}",
                    p.id, slot.id
                ));
            }
            if slot.shape != p.value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "optimizer state",
                    left: slot.shape,
                    right: p.value.shape(),
                });
            }
            p.check()?;
        }
        Ok(())
    }
}
