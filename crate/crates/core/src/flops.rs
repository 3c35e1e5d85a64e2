//! FLOP cost model for training steps and optimizer updates.
//!
//! Conventions: a `p x q` by `q x r` product costs `2pqr`; forward plus
//! backward costs `6` FLOPs per parameter per token; attention adds
//! `12·L·B·S²·d`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optim::{OptimConfig, Period};

/// A 2D parameter matrix of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    #[serde(default)]
    pub embedding: bool,
}

impl NamedMatrix {
    pub fn new(name: impl Into<String>, rows: u64, cols: u64) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            embedding: false,
        }
    }

    pub fn embedding(name: impl Into<String>, rows: u64, cols: u64) -> Self {
        Self {
            embedding: true,
            ..Self::new(name, rows, cols)
        }
    }

    pub fn numel(&self) -> u64 {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub name: String,
    pub layers: u64,
    pub dim: u64,
    pub seq_len: u64,
    pub batch: u64,
    pub vocab: u64,
    pub param_matrices: Vec<NamedMatrix>,
    pub vector_params: u64,
    pub total_params: u64,
}

impl ModelShape {
    /// GPT-2 style decoder with tied input/output embeddings, learned
    /// positions, fused QKV, a `4d` MLP, biases, and LayerNorm gains.
    pub fn gpt2_like(
        name: impl Into<String>,
        layers: u64,
        dim: u64,
        seq_len: u64,
        batch: u64,
        vocab: u64,
    ) -> Self {
        let mut mats = vec![
            NamedMatrix::embedding("wte", vocab, dim),
            NamedMatrix::embedding("wpe", seq_len, dim),
        ];
        for l in 0..layers {
            mats.push(NamedMatrix::new(format!("h{l}.attn.qkv"), dim, 3 * dim));
            mats.push(NamedMatrix::new(format!("h{l}.attn.proj"), dim, dim));
            mats.push(NamedMatrix::new(format!("h{l}.mlp.fc"), dim, 4 * dim));
            mats.push(NamedMatrix::new(format!("h{l}.mlp.proj"), 4 * dim, dim));
        }
        // Per layer: two LayerNorms (gain + bias) and biases 3d + d + 4d + d.
        let vector_params = layers * (4 * dim + 9 * dim) + 2 * dim;
        let total_params = mats.iter().map(NamedMatrix::numel).sum::<u64>() + vector_params;
        Self {
            name: name.into(),
            layers,
            dim,
            seq_len,
            batch,
            vocab,
            param_matrices: mats,
            vector_params,
            total_params,
        }
    }

    /// 12 layers, width 768, sequence 512, batch 32.
    pub fn gpt2_124m() -> Self {
        Self::gpt2_like("124M", 12, 768, 512, 32, 50_304)
    }

    /// 24 layers, width 1024, sequence 1024, batch 512.
    pub fn gpt2_355m() -> Self {
        Self::gpt2_like("355M", 24, 1024, 1024, 512, 50_304)
    }

    /// 12 layers, width 2048, sequence 512, batch 1984.
    pub fn gpt2_720m() -> Self {
        Self::gpt2_like("720M", 12, 2048, 512, 1984, 50_304)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "124M" | "124m" => Some(Self::gpt2_124m()),
            "355M" | "355m" => Some(Self::gpt2_355m()),
            "720M" | "720m" => Some(Self::gpt2_720m()),
            _ => None,
        }
    }

    pub fn tokens_per_step(&self) -> u64 {
        self.batch * self.seq_len
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.layers, self.dim, self.seq_len, self.batch, self.vocab] {
            if v == 0 {
                return invalid(format!("model shape {} has a zero dimension", self.name));
            }
        }
        if self.param_matrices.iter().any(|m| m.rows == 0 || m.cols == 0) {
            return invalid(format!("model shape {} has an empty matrix", self.name));
        }
        let sum = self.param_matrices.iter().map(NamedMatrix::numel).sum::<u64>() + self.vector_params;
        if sum != self.total_params {
            return invalid(format!(
                "total_params {} does not equal matrix plus vector params {sum}",
                self.total_params
            ));
        }
        Ok(())
    }
}

/// Counting switches for the sensitivity of the share estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlopOptions {
    /// Run Newton-Schulz on the embedding matrices too.
    pub include_embeddings: bool,
    /// Add the `12·L·B·S²·d` attention term to the training step.
    pub include_attention: bool,
}

impl Default for FlopOptions {
    fn default() -> Self {
        Self {
            include_embeddings: true,
            include_attention: true,
        }
    }
}

pub fn matmul_flops(p: u64, q: u64, r: u64) -> u128 {
    2 * p as u128 * q as u128 * r as u128
}

/// `K·(4s²t + 2s³) + 2st` with `s = min(m, n)`, `t = max(m, n)`.
pub fn ns_flops(m: usize, n: usize, k: usize) -> u128 {
    let (s, t) = (m.min(n) as u128, m.max(n) as u128);
    k as u128 * (4 * s * s * t + 2 * s * s * s) + 2 * s * t
}

/// Forward and backward cost of one step (optimizer excluded).
pub fn train_step_flops(shape: &ModelShape, opts: FlopOptions) -> u128 {
    let tokens = shape.tokens_per_step() as u128;
    let dense = 6 * shape.total_params as u128 * tokens;
    let attention = if opts.include_attention {
        12 * shape.layers as u128 * tokens * shape.seq_len as u128 * shape.dim as u128
    } else {
        0
    };
    dense + attention
}

fn matrices(shape: &ModelShape, opts: FlopOptions) -> impl Iterator<Item = &NamedMatrix> {
    shape
        .param_matrices
        .iter()
        .filter(move |m| opts.include_embeddings || !m.embedding)
}

/// Per-matrix amortized cost `ns/P + ((P−1)/P)·mn`.
pub fn matrix_amortized_flops(rows: u64, cols: u64, period: Period, k: usize) -> f64 {
    let ns = ns_flops(rows as usize, cols as usize, k) as f64;
    let sign = (rows * cols) as f64;
    match period {
        Period::Finite(1) => ns,
        Period::Finite(p) => ns / p as f64 + (p - 1) as f64 / p as f64 * sign,
        Period::Infinite => sign,
    }
}

/// Average optimizer cost per step over one period, summed over matrices.
pub fn optimizer_amortized_flops(shape: &ModelShape, config: &OptimConfig, opts: FlopOptions) -> f64 {
    matrices(shape, opts)
        .map(|m| matrix_amortized_flops(m.rows, m.cols, config.period, config.ns_iters))
        .sum()
}

pub fn total_step_flops(shape: &ModelShape, config: &OptimConfig, opts: FlopOptions) -> f64 {
    train_step_flops(shape, opts) as f64 + optimizer_amortized_flops(shape, config, opts)
}

/// Newton-Schulz share of a pure-spectral (`P = 1`) step.
pub fn ns_share(shape: &ModelShape, config: &OptimConfig, opts: FlopOptions) -> Result<f64> {
    if config.period != Period::Finite(1) {
        return invalid("ns_share is defined for P = 1");
    }
    let opt = optimizer_amortized_flops(shape, config, opts);
    Ok(opt / (train_step_flops(shape, opts) as f64 + opt))
}

/// Relative drop in total per-step FLOPs when moving from `P = 1` to `period`.
pub fn total_flop_reduction(shape: &ModelShape, ns_iters: usize, period: Period, opts: FlopOptions) -> f64 {
    let base = OptimConfig {
        period: Period::Finite(1),
        ns_iters,
        ..OptimConfig::default()
    };
    let alt = OptimConfig { period, ..base.clone() };
    let a = total_step_flops(shape, &base, opts);
    let b = total_step_flops(shape, &alt, opts);
    (a - b) / a
}

/// Bytes gathered per spectral step when every matrix must be assembled in full.
pub fn allgather_bytes_per_muon_step(shape: &ModelShape, bytes_per_elem: u64, opts: FlopOptions) -> u128 {
    matrices(shape, opts)
        .map(|m| m.numel() as u128 * bytes_per_elem as u128)
        .sum()
}

/// Amortized all-gather bytes per step: one full gather every `P` steps.
pub fn allgather_bytes_amortized(shape: &ModelShape, bytes_per_elem: u64, period: Period, opts: FlopOptions) -> f64 {
    let full = allgather_bytes_per_muon_step(shape, bytes_per_elem, opts) as f64;
    match period {
        Period::Finite(p) => full / p as f64,
        Period::Infinite => 0.0,
    }
}

/// One row of the per-matrix breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCost {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    pub ns_flops: f64,
    pub sign_flops: f64,
    pub amortized_flops: f64,
}

pub fn matrix_breakdown(shape: &ModelShape, config: &OptimConfig, opts: FlopOptions) -> Vec<MatrixCost> {
    matrices(shape, opts)
        .map(|m| MatrixCost {
            name: m.name.clone(),
            rows: m.rows,
            cols: m.cols,
            ns_flops: ns_flops(m.rows as usize, m.cols as usize, config.ns_iters) as f64,
            sign_flops: m.numel() as f64,
            amortized_flops: matrix_amortized_flops(m.rows, m.cols, config.period, config.ns_iters),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_examples() {
        assert_eq!(matmul_flops(2, 3, 4), 48);
        assert_eq!(matmul_flops(1, 1, 1), 2);
        assert_eq!(matmul_flops(768, 768, 768), 905_969_664);
    }

    #[test]
    fn ns_examples() {
        assert_eq!(ns_flops(2, 2, 1), 56);
        let s = 768u128;
        assert_eq!(ns_flops(768, 768, 1), 6 * s * s * s + 2 * s * s);
        assert_eq!(ns_flops(3, 7, 2), ns_flops(7, 3, 2));
    }

    #[test]
    fn train_step_unit_and_linearity() {
        let unit = ModelShape {
            name: "unit".into(),
            layers: 1,
            dim: 1,
            seq_len: 1,
            batch: 1,
            vocab: 1,
            param_matrices: vec![NamedMatrix::new("w", 1, 1)],
            vector_params: 0,
            total_params: 1,
        };
        unit.validate().unwrap();
        let no_attn = FlopOptions {
            include_attention: false,
            ..FlopOptions::default()
        };
        assert_eq!(train_step_flops(&unit, no_attn), 6);

        let mut s = ModelShape::gpt2_124m();
        let base = train_step_flops(&s, FlopOptions::default());
        s.batch *= 2;
        assert_eq!(train_step_flops(&s, FlopOptions::default()), 2 * base);
    }

    #[test]
    fn presets_are_consistent() {
        for s in [ModelShape::gpt2_124m(), ModelShape::gpt2_355m(), ModelShape::gpt2_720m()] {
            s.validate().unwrap();
        }
        let p = ModelShape::gpt2_124m().total_params as f64;
        assert!((p / 1e6 - 124.0).abs() < 2.0, "{p}");
    }

    #[test]
    fn amortization_boundaries() {
        let (m, n, k) = (64, 96, 5);
        let p1 = matrix_amortized_flops(m, n, Period::Finite(1), k);
        let inf = matrix_amortized_flops(m, n, Period::Infinite, k);
        assert_eq!(p1, ns_flops(64, 96, 5) as f64);
        assert_eq!(inf, (m * n) as f64);
        for p in [2u64, 3, 7] {
            let got = matrix_amortized_flops(m, n, Period::Finite(p), k);
            let mix = p1 / p as f64 + (p - 1) as f64 / p as f64 * inf;
            assert!((got - mix).abs() <= 1e-12 * got);
        }
        let two = matrix_amortized_flops(m, n, Period::Finite(2), k);
        assert_eq!(two - inf / 2.0, p1 / 2.0);
    }

    #[test]
    fn share_requires_p1() {
        let cfg = OptimConfig::default();
        assert!(ns_share(&ModelShape::gpt2_124m(), &cfg, FlopOptions::default()).is_err());
    }
}
