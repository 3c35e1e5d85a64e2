//! Closed-form calculators for the convergence bounds: period-averaged
//! constants, the bound right-hand sides with and without weight decay, the
//! optimal parameter choices, and the period trade-off factor `φ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optim::Period;

/// Problem constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    pub rho_nuc: f64,
    pub rho_1: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub delta0: f64,
    pub e0_l1: f64,
    pub m: u64,
    pub n: u64,
    #[serde(default = "default_k_ns")]
    pub k_ns: u64,
}

fn default_k_ns() -> u64 {
    5
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 1.0 && self.kappa <= 2.0) {
            return invalid(format!("kappa must lie in (1, 2], got {}", self.kappa));
        }
        for (name, v) in [
            ("L2", self.l2),
            ("Linf", self.linf),
            ("rho_nuc", self.rho_nuc),
            ("rho_1", self.rho_1),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("delta0", self.delta0), ("e0_l1", self.e0_l1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        if self.m == 0 || self.n == 0 || self.k_ns == 0 {
            return invalid("m, n and k_ns must be >= 1");
        }
        let mn = (self.m * self.n) as f64;
        let tol = 1e-9;
        if self.l2 > self.linf * (1.0 + tol) || self.linf > mn * self.l2 * (1.0 + tol) {
            return invalid(format!(
                "need L2 <= Linf <= mn·L2, got L2 = {}, Linf = {}, mn = {mn}",
                self.l2, self.linf
            ));
        }
        Ok(())
    }

    pub fn sqrt_mn(&self) -> f64 {
        ((self.m * self.n) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessVariant {
    Plain,
    Refined,
    WeightDecay,
}

/// `(η̄, ρ̄, L̄)` together with the auxiliary maxima they were built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodConstants {
    pub eta_bar: f64,
    pub rho_bar: f64,
    #[serde(rename = "L_bar")]
    pub l_bar: f64,
    pub eta_max: f64,
    pub eta_tilde_max: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

pub fn period_constants(
    eta_m: f64,
    eta_l: f64,
    period: Period,
    inputs: &TheoryInputs,
    variant: SmoothnessVariant,
) -> Result<PeriodConstants> {
    inputs.validate()?;
    if !(eta_m > 0.0 && eta_l > 0.0) {
        return invalid("learning rates must be positive");
    }
    match period {
        Period::Finite(0) => invalid("period must be >= 1"),
        Period::Finite(1) => Ok(PeriodConstants {
            eta_bar: eta_m,
            rho_bar: inputs.rho_nuc,
            l_bar: inputs.l2,
            eta_max: eta_m,
            eta_tilde_max: eta_m,
            c2: 1.0,
        }),
        Period::Infinite => Ok(PeriodConstants {
            eta_bar: eta_l,
            rho_bar: inputs.rho_1,
            l_bar: inputs.linf,
            eta_max: eta_l,
            eta_tilde_max: eta_l,
            c2: 1.0,
        }),
        Period::Finite(p) => {
            let p = p as f64;
            let q = p - 1.0;
            let eta_bar = eta_m / p + q * eta_l / p;
            let rho_bar = eta_m / (p * eta_bar) * inputs.rho_nuc + q * eta_l / (p * eta_bar) * inputs.rho_1;
            let eta_max = eta_m.max(eta_l);
            let eta_tilde_max = eta_m.max(inputs.sqrt_mn() * eta_l);
            let c2 = inputs.sqrt_mn();
            let den = p * eta_bar * eta_bar;
            let l_bar = match variant {
                SmoothnessVariant::Plain => {
                    eta_m * eta_tilde_max / den * inputs.l2 + q * eta_l * eta_max / den * inputs.linf
                }
                SmoothnessVariant::Refined => {
                    eta_m * eta_m / den * inputs.l2 + q * eta_l * eta_l / den * inputs.linf
                }
                SmoothnessVariant::WeightDecay => {
                    eta_m * eta_max * c2 / den * inputs.l2 + q * eta_l * eta_max / den * inputs.linf
                }
            };
            Ok(PeriodConstants {
                eta_bar,
                rho_bar,
                l_bar,
                eta_max,
                eta_tilde_max,
                c2,
            })
        }
    }
}

/// The five terms of the bound and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `Δ₀ / (η̄T)`
    pub descent: f64,
    /// `4L̄η̄ / (1−β₂)`, or `8L̄η̄ / min(1−β₂, 1/C₂)` with weight decay.
    pub smoothness: f64,
    /// `(2β₁/β₂)·ρ̄σ·(1−β₂)^((κ−1)/κ)`
    pub noise: f64,
    /// `2|1 − β₁/β₂|·ρ̄σ`
    pub momentum_mismatch: f64,
    /// `(2β₁/β₂)·η_max‖E₀‖₁ / (η̄T(1−β₂))`
    pub initial_error: f64,
    pub total: f64,
}

/// `β₁/β₂`, taken as 1 when both vanish.
fn beta_ratio(beta1: f64, beta2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
        return invalid("betas must lie in [0, 1)");
    }
    if beta1 == beta2 {
        return Ok(1.0);
    }
    if beta2 == 0.0 {
        return invalid("beta1/beta2 is undefined for beta2 = 0 < beta1");
    }
    Ok(beta1 / beta2)
}

fn bound_common(
    inputs: &TheoryInputs,
    pc: &PeriodConstants,
    beta1: f64,
    beta2: f64,
    t: u64,
    eta_max: f64,
    smoothness: f64,
) -> Result<BoundTerms> {
    inputs.validate()?;
    if t == 0 {
        return invalid("T must be >= 1");
    }
    let ratio = beta_ratio(beta1, beta2)?;
    let one_minus = 1.0 - beta2;
    let k = inputs.kappa;
    let rs = pc.rho_bar * inputs.sigma;
    let tf = t as f64;
    let descent = inputs.delta0 / (pc.eta_bar * tf);
    let noise = 2.0 * ratio * rs * one_minus.powf((k - 1.0) / k);
    let momentum_mismatch = 2.0 * (1.0 - ratio).abs() * rs;
    let initial_error = 2.0 * ratio * eta_max * inputs.e0_l1 / (pc.eta_bar * tf * one_minus);
    Ok(BoundTerms {
        descent,
        smoothness,
        noise,
        momentum_mismatch,
        initial_error,
        total: descent + smoothness + noise + momentum_mismatch + initial_error,
    })
}

/// Right-hand side of the bound on the period-averaged gradient metric.
pub fn bound_rhs(
    inputs: &TheoryInputs,
    pc: &PeriodConstants,
    beta1: f64,
    beta2: f64,
    t: u64,
    eta_max: f64,
) -> Result<BoundTerms> {
    let smoothness = 4.0 * pc.l_bar * pc.eta_bar / (1.0 - beta2);
    bound_common(inputs, pc, beta1, beta2, t, eta_max, smoothness)
}

/// Right-hand side of the Frank-Wolfe gap bound under weight decay.
pub fn bound_rhs_wd(
    inputs: &TheoryInputs,
    pc: &PeriodConstants,
    beta1: f64,
    beta2: f64,
    t: u64,
    eta_max: f64,
    c2: f64,
) -> Result<BoundTerms> {
    if !(c2 > 0.0) {
        return invalid("C2 must be positive");
    }
    let smoothness = 8.0 * pc.l_bar * pc.eta_bar / (1.0 - beta2).min(1.0 / c2);
    bound_common(inputs, pc, beta1, beta2, t, eta_max, smoothness)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    Plain,
    WeightDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalParams {
    pub beta2: f64,
    pub beta1_low: f64,
    pub beta1_high: f64,
    pub eta_l: f64,
    pub eta_m: f64,
    /// Horizon used: the larger of the two requirements, rounded up to a
    /// multiple of a finite period.
    pub t: u64,
    /// `⌈2⁹·L̄Δ₀·max(...)⌉`, the descent-term requirement.
    pub t_descent: u64,
    /// Requirement keeping the initial-error term below `ε/8`.
    pub t_initial_error: u64,
    pub constants: PeriodConstants,
}

fn ceil_u64(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil().max(1.0) as u64
    }
}

/// Parameter choice that budgets every term of the bound to `ε/8`.
pub fn optimal_params(
    inputs: &TheoryInputs,
    eps: f64,
    period: Period,
    alpha_scale: f64,
    variant: BoundVariant,
) -> Result<OptimalParams> {
    inputs.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    if !(alpha_scale > 0.0 && alpha_scale.is_finite()) {
        return invalid(format!("alpha_scale must be positive, got {alpha_scale}"));
    }
    let smooth_variant = match variant {
        BoundVariant::Plain => SmoothnessVariant::Plain,
        BoundVariant::WeightDecay => SmoothnessVariant::WeightDecay,
    };
    // Every constant is invariant under a joint rescaling of (η_M, η_L).
    let unit = period_constants(alpha_scale, 1.0, period, inputs, smooth_variant)?;
    let k = inputs.kappa;
    let expo = k / (k - 1.0);
    let rs = unit.rho_bar * inputs.sigma;
    let (cap, c_t, divisor) = match variant {
        BoundVariant::Plain => (1.0, 1.0, 32.0),
        BoundVariant::WeightDecay => (1.0 / unit.c2, unit.c2, 64.0),
    };
    let (one_minus, beta1_low_frac) = if rs > 0.0 {
        let q = eps / (16.0 * rs);
        (q.powf(expo).min(cap), (1.0 - q).max(0.0))
    } else {
        (cap, 0.0)
    };
    let beta2 = 1.0 - one_minus;
    let weight = match period {
        Period::Finite(p) => alpha_scale / p as f64 + (p - 1) as f64 / p as f64,
        Period::Infinite => 1.0,
    };
    let eta_l = eps * one_minus / (divisor * weight * unit.l_bar);
    let eta_m = alpha_scale * eta_l;

    let noise_branch = if rs > 0.0 {
        (16.0 * rs).powf(expo) / eps.powf((3.0 * k - 2.0) / (k - 1.0))
    } else {
        0.0
    };
    let t_descent = ceil_u64(512.0 * unit.l_bar * inputs.delta0 * noise_branch.max(c_t / (eps * eps)));
    let t_initial_error =
        ceil_u64(16.0 * (unit.eta_max / unit.eta_bar) * inputs.e0_l1 / (one_minus * eps));
    let mut t = t_descent.max(t_initial_error);
    if let Period::Finite(p) = period {
        t = t.div_ceil(p).saturating_mul(p);
    }
    let constants = period_constants(eta_m, eta_l, period, inputs, smooth_variant)?;
    Ok(OptimalParams {
        beta2,
        beta1_low: beta2 * beta1_low_frac,
        beta1_high: beta2,
        eta_l,
        eta_m,
        t,
        t_descent,
        t_initial_error,
        constants,
    })
}

/// `1/P + (1 − 1/P)·r`, written so that `r = 1` gives exactly 1.
fn blend(p: f64, r: f64) -> f64 {
    r - (r - 1.0) / p
}

/// The trade-off factor as displayed:
/// `(1/P)^((3κ−2)/(κ−1))·(1/P + 1/K)·(P + P(P−1)r_L)·(1 + (P−1)r_ρ)^(κ/(κ−1))`.
pub fn phi_exact(p: u64, r_l: f64, r_rho: f64, kappa: f64, k_ns: u64) -> f64 {
    let pf = p as f64;
    let e1 = (3.0 * kappa - 2.0) / (kappa - 1.0);
    let e2 = kappa / (kappa - 1.0);
    (1.0 / pf).powf(e1)
        * (1.0 / pf + 1.0 / k_ns as f64)
        * (pf + pf * (pf - 1.0) * r_l)
        * (1.0 + (pf - 1.0) * r_rho).powf(e2)
}

/// Product form `(1/P + (1−1/P)r_L)·(1/P + (1−1/P)r_ρ)^(κ/(κ−1))`.
pub fn phi_approx(p: f64, r_l: f64, r_rho: f64, kappa: f64) -> f64 {
    if p == 1.0 {
        return 1.0;
    }
    blend(p, r_l) * blend(p, r_rho).powf(kappa / (kappa - 1.0))
}

/// `lim_{P→∞} φ_approx = r_L·r_ρ^(κ/(κ−1))`.
pub fn phi_approx_limit(r_l: f64, r_rho: f64, kappa: f64) -> f64 {
    r_l * r_rho.powf(kappa / (kappa - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    MuonBest,
    LionTrend,
    InteriorOptimum,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MuonBest => "muon_best",
            Self::LionTrend => "lion_trend",
            Self::InteriorOptimum => "interior_optimum",
        }
    }
}

/// Which `φ` drives the argmin and the case label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiCriterion {
    #[default]
    Approx,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    #[serde(rename = "P")]
    pub p: u64,
    pub phi_exact: f64,
    pub phi_approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub criterion: PhiCriterion,
    pub p_star: u64,
    pub case_label: CaseLabel,
    pub p_star_exact: u64,
    pub p_star_approx: u64,
    pub approx_limit: f64,
    pub table: Vec<PhiRow>,
}

fn argmin(values: &[f64]) -> usize {
    // Strict comparison keeps the smallest index on ties.
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Labels a scanned `φ` curve over `P = 1..`: `muon_best` if it never drops
/// below its value at `P = 1` step over step, `lion_trend` if it strictly
/// decreases, `interior_optimum` otherwise.
pub fn classify(values: &[f64]) -> CaseLabel {
    let pairs = || values.windows(2);
    if pairs().all(|w| w[1] >= w[0]) {
        CaseLabel::MuonBest
    } else if pairs().all(|w| w[1] < w[0]) {
        CaseLabel::LionTrend
    } else {
        CaseLabel::InteriorOptimum
    }
}

/// Scans `P ∈ {1..p_max}` and picks the minimizer of the chosen `φ`.
pub fn scan_optimal_p(
    r_l: f64,
    r_rho: f64,
    kappa: f64,
    k_ns: u64,
    p_max: u64,
    criterion: PhiCriterion,
) -> Result<ScanResult> {
    if p_max < 2 {
        return invalid("p_max must be >= 2");
    }
    if !(kappa > 1.0 && kappa <= 2.0) {
        return invalid(format!("kappa must lie in (1, 2], got {kappa}"));
    }
    if !(r_l >= 0.0 && r_rho >= 0.0) || k_ns == 0 {
        return invalid("ratios must be non-negative and k_ns >= 1");
    }
    let table: Vec<PhiRow> = (1..=p_max)
        .map(|p| PhiRow {
            p,
            phi_exact: phi_exact(p, r_l, r_rho, kappa, k_ns),
            phi_approx: phi_approx(p as f64, r_l, r_rho, kappa),
        })
        .collect();
    let exact: Vec<f64> = table.iter().map(|r| r.phi_exact).collect();
    let approx: Vec<f64> = table.iter().map(|r| r.phi_approx).collect();
    let p_star_exact = argmin(&exact) as u64 + 1;
    let p_star_approx = argmin(&approx) as u64 + 1;
    let (p_star, case_label) = match criterion {
        PhiCriterion::Approx => (p_star_approx, classify(&approx)),
        PhiCriterion::Exact => (p_star_exact, classify(&exact)),
    };
    Ok(ScanResult {
        criterion,
        p_star,
        case_label,
        p_star_exact,
        p_star_approx,
        approx_limit: phi_approx_limit(r_l, r_rho, kappa),
        table,
    })
}
