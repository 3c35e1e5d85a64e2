use crate::error::{invalid, Error, Result};
use crate::flops::ns_flops;
use crate::linalg::{newton_schulz, power_iter_sigma1, sign_elem, stable_rank, Matrix};
use crate::optim::config::{AdamWConfig, BranchMode, MomentumForm, OptimConfig};
use crate::optim::schedule::lr_multiplier;
use crate::optim::state::{Branch, OptimState, ParamGroup, SlotState};
use crate::rng::derive_key;
use crate::scalar::Scalar;

/// Summary of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Index of the step just taken.
    pub t: u64,
    pub lr_mult: f64,
    /// One entry per param; `None` for vector params.
    pub branches: Vec<Option<Branch>>,
    /// Factor applied by global clipping (1 when inactive).
    pub clip_scale: f64,
    /// FLOPs spent on the matrix-parameter updates.
    pub optimizer_flops: f64,
}

impl StepReport {
    /// Branch of the first matrix param, if any.
    pub fn primary_branch(&self) -> Option<Branch> {
        self.branches.iter().flatten().next().copied()
    }
}

/// Heavy-ball learning rate matching an EMA learning rate: `(1−β)·η`.
pub fn hb_equivalent_lr(eta_ema: f64, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return invalid(format!("beta must lie in [0, 1), got {beta}"));
    }
    Ok((1.0 - beta) * eta_ema)
}

fn clip_refs<T: Scalar>(grads: &mut [&mut Matrix<T>], max_norm: T) -> Result<T> {
    if !(max_norm > T::zero()) {
        return invalid("clip max_norm must be positive");
    }
    let sq: T = grads
        .iter()
        .flat_map(|g| g.as_slice().iter())
        .map(|&x| x * x)
        .sum();
    let norm = sq.sqrt();
    if norm <= max_norm {
        return Ok(T::one());
    }
    let factor = max_norm / norm;
    for g in grads.iter_mut() {
        g.scale_in_place(factor);
    }
    Ok(factor)
}

/// Scales all gradients by `max_norm / g` when their joint Frobenius norm `g`
/// exceeds `max_norm`. Returns the factor applied.
pub fn clip_global<T: Scalar>(grads: &mut [Matrix<T>], max_norm: T) -> Result<T> {
    let mut refs: Vec<&mut Matrix<T>> = grads.iter_mut().collect();
    clip_refs(&mut refs, max_norm)
}

/// Stable-rank rule: Muon iff `‖M‖_F² / σ̂₁² ≤ α·min(m, n)`.
///
/// The comparison carries a `1e-12` relative allowance so the inclusive
/// boundary survives rounding in `σ̂₁`. Zero momentum selects Lion.
pub fn adaptive_branch<T: Scalar>(m: &Matrix<T>, alpha: f64, power_iters: usize, seed: u64) -> Branch {
    if m.is_zero() {
        return Branch::Lion;
    }
    let sigma = power_iter_sigma1(m, power_iters.max(1), seed);
    let Ok(r) = stable_rank(m, sigma) else {
        return Branch::Lion;
    };
    let threshold = alpha * m.rows().min(m.cols()) as f64;
    if r.to_f64_lossy() <= threshold * (1.0 + 1e-12) {
        Branch::Muon
    } else {
        Branch::Lion
    }
}

/// One AdamW update with bias correction and decoupled decay.
///
/// `t_adam` is the 1-based count of AdamW steps taken so far including this one.
pub fn adamw_step<T: Scalar>(
    value: &mut Matrix<T>,
    m: &mut Matrix<T>,
    v: &mut Matrix<T>,
    grad: &Matrix<T>,
    t_adam: u64,
    cfg: &AdamWConfig,
) -> Result<()> {
    value.ensure_same_shape(grad, "adamw grad")?;
    value.ensure_same_shape(m, "adamw m")?;
    value.ensure_same_shape(v, "adamw v")?;
    if t_adam == 0 {
        return invalid("adamw step counter starts at 1");
    }
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let bc1 = T::one() - b1.powi(t_adam.min(i32::MAX as u64) as i32);
    let bc2 = T::one() - b2.powi(t_adam.min(i32::MAX as u64) as i32);
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    let decay = T::one() - lr * T::of(cfg.weight_decay);
    let slices = value
        .as_mut_slice()
        .iter_mut()
        .zip(m.as_mut_slice().iter_mut())
        .zip(v.as_mut_slice().iter_mut())
        .zip(grad.as_slice());
    for (((w, mi), vi), &g) in slices {
        *mi = b1 * *mi + (T::one() - b1) * g;
        *vi = b2 * *vi + (T::one() - b2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *w = *w * decay - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

fn select_branch<T: Scalar>(
    config: &OptimConfig,
    t: u64,
    index: usize,
    momentum: &Matrix<T>,
    grad: &Matrix<T>,
) -> Branch {
    match config.branch_mode {
        BranchMode::Periodic => {
            if config.period.is_muon_step(t) {
                Branch::Muon
            } else {
                Branch::Lion
            }
        }
        BranchMode::Adaptive => {
            let source = if t > 0 { momentum } else { grad };
            let seed = derive_key(config.base_seed, &[index as u64, t]);
            adaptive_branch(source, config.adaptive_alpha, config.power_iters, seed)
        }
    }
}

/// Applies one optimizer step to every parameter and advances the counter.
///
/// Matrix parameters follow the alternating rule: direction
/// `Ĝ = β₁M + (1−β₁)G`, then either `W ← W − η_M s_t (Scale·NS(Ĝ) + λW)` or
/// `W ← W − η_L s_t (sign(Ĝ) + λW)`, then `M ← β₂M + (1−β₂)G`. Vector
/// parameters take an AdamW step at the fixed fallback learning rate.
pub fn step<T: Scalar>(
    state: &mut OptimState<T>,
    params: &mut [ParamGroup<T>],
    config: &OptimConfig,
) -> Result<StepReport> {
    config.validate()?;
    state.check_params(params)?;
    for p in params.iter() {
        if !p.grad.as_slice().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", p.id)));
        }
    }
    let t = state.t;
    let s = lr_multiplier(&config.schedule, t)?;

    let clip_scale = match config.clip_global_norm {
        Some(c) => {
            let mut refs: Vec<&mut Matrix<T>> = params.iter_mut().map(|p| &mut p.grad).collect();
            clip_refs(&mut refs, T::of(c))?.to_f64_lossy()
        }
        None => 1.0,
    };

    let b1 = T::of(config.beta1);
    let b2 = T::of(config.beta2);
    let (c1, c2) = match config.momentum_form {
        MomentumForm::Ema => (T::one() - b1, T::one() - b2),
        MomentumForm::HeavyBall => (T::one(), T::one()),
    };
    let wd = T::of(config.weight_decay);

    let mut branches = Vec::with_capacity(params.len());
    let mut flops = 0.0;
    for (index, (slot, p)) in state.slots.iter_mut().zip(params.iter_mut()).enumerate() {
        match &mut slot.state {
            SlotState::Momentum(m) => {
                let branch = select_branch(config, t, index, m, &p.grad);
                let dir = m.zip_map(&p.grad, |mi, g| b1 * mi + c1 * g)?;
                let (rows, cols) = dir.shape();
                let (eta, d) = match branch {
                    Branch::Muon => {
                        let mut d = if dir.is_zero() {
                            Matrix::zeros(rows, cols)
                        } else {
                            newton_schulz(&dir, &config.ns_preset, config.ns_iters)?
                        };
                        let factor = config.ns_scale.factor(rows, cols);
                        if factor != 1.0 {
                            d.scale_in_place(T::of(factor));
                        }
                        flops += ns_flops(rows, cols, config.ns_iters) as f64;
                        (config.eta_m, d)
                    }
                    Branch::Lion => {
                        flops += (rows * cols) as f64;
                        (config.eta_l, sign_elem(&dir))
                    }
                };
                if config.branch_mode == BranchMode::Adaptive {
                    flops += (4 * rows * cols * config.power_iters) as f64;
                }
                let lr = T::of(eta * s);
                for (w, &di) in p.value.as_mut_slice().iter_mut().zip(d.as_slice()) {
                    *w = *w - lr * (di + wd * *w);
                }
                for (mi, &g) in m.as_mut_slice().iter_mut().zip(p.grad.as_slice()) {
                    *mi = b2 * *mi + c2 * g;
                }
                branches.push(Some(branch));
            }
            SlotState::Adam { m, v, t: ta } => {
                *ta += 1;
                adamw_step(&mut p.value, m, v, &p.grad, *ta, &config.adamw)?;
                branches.push(None);
            }
        }
    }
    state.t += 1;
    Ok(StepReport {
        t,
        lr_mult: s,
        branches,
        clip_scale,
        optimizer_flops: flops,
    })
}
