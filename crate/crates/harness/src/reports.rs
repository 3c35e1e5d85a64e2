//! JSON reports of the `theory` and `flops` subcommands.

use serde::Serialize;

use lmo_core::flops::{
    allgather_bytes_amortized, allgather_bytes_per_muon_step, matrix_breakdown, ns_share,
    total_flop_reduction, total_step_flops, train_step_flops, MatrixCost,
};
use lmo_core::optim::{OptimConfig, Period};
use lmo_core::theory::{
    bound_rhs, bound_rhs_wd, optimal_params, phi_approx_limit, scan_optimal_p, BoundTerms, BoundVariant,
    OptimalParams, PeriodConstants, PhiRow, ScanResult,
};

use crate::config::{FlopsSpec, TheorySpec};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPair {
    /// Evaluated at the smallest admissible `β₁`.
    pub beta1_low: BoundTerms,
    /// Evaluated at `β₁ = β₂`.
    pub beta1_high: BoundTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSummary {
    pub r_l: f64,
    pub r_rho: f64,
    pub kappa: f64,
    pub k_ns: u64,
    pub p_star: u64,
    pub p_star_exact: u64,
    pub p_star_approx: u64,
    pub approx_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub eps: f64,
    pub period: Period,
    pub variant: BoundVariant,
    pub constants: PeriodConstants,
    pub bound_terms: BoundPair,
    pub optimal_params: OptimalParams,
    pub phi: PhiSummary,
    pub phi_table: Vec<PhiRow>,
    pub case_label: String,
}

pub fn theory_report(spec: &TheorySpec) -> Result<TheoryReport> {
    spec.validate()?;
    let inputs = &spec.inputs;
    let opt = optimal_params(inputs, spec.eps, spec.period, spec.alpha_scale, spec.variant)?;
    let pc = opt.constants;
    let bound = |beta1: f64| match spec.variant {
        BoundVariant::Plain => bound_rhs(inputs, &pc, beta1, opt.beta2, opt.t, pc.eta_max),
        BoundVariant::WeightDecay => bound_rhs_wd(inputs, &pc, beta1, opt.beta2, opt.t, pc.eta_max, pc.c2),
    };
    let bound_terms = BoundPair {
        beta1_low: bound(opt.beta1_low)?,
        beta1_high: bound(opt.beta1_high)?,
    };
    let (r_l, r_rho) = spec.phi.ratios(inputs)?;
    let scan: ScanResult = scan_optimal_p(r_l, r_rho, inputs.kappa, inputs.k_ns, spec.phi.p_max, spec.phi.criterion)?;
    Ok(TheoryReport {
        eps: spec.eps,
        period: spec.period,
        variant: spec.variant,
        constants: pc,
        bound_terms,
        optimal_params: opt,
        phi: PhiSummary {
            r_l,
            r_rho,
            kappa: inputs.kappa,
            k_ns: inputs.k_ns,
            p_star: scan.p_star,
            p_star_exact: scan.p_star_exact,
            p_star_approx: scan.p_star_approx,
            approx_limit: phi_approx_limit(r_l, r_rho, inputs.kappa),
        },
        phi_table: scan.table,
        case_label: scan.case_label.as_str().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodCost {
    pub period: Period,
    pub optimizer_flops: f64,
    pub total_step_flops: f64,
    /// Drop in total FLOPs relative to `P = 1`.
    pub reduction_vs_p1: f64,
    pub allgather_bytes_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub name: String,
    pub total_params: u64,
    pub tokens_per_step: u64,
    pub train_step_flops: f64,
    pub ns_share: f64,
    pub allgather_bytes_full: f64,
    pub periods: Vec<PeriodCost>,
    pub matrices: Vec<MatrixCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopsReport {
    pub ns_iters: usize,
    pub shapes: Vec<ShapeReport>,
}

pub fn flops_report(spec: &FlopsSpec) -> Result<FlopsReport> {
    spec.validate()?;
    let opts = spec.options;
    let mut shapes = Vec::new();
    for s in &spec.shapes {
        let shape = s.resolve()?;
        let p1 = OptimConfig {
            period: Period::Finite(1),
            ns_iters: spec.ns_iters,
            ..OptimConfig::default()
        };
        let periods = spec
            .periods
            .iter()
            .map(|&period| {
                let cfg = OptimConfig { period, ..p1.clone() };
                let total = total_step_flops(&shape, &cfg, opts);
                PeriodCost {
                    period,
                    optimizer_flops: total - train_step_flops(&shape, opts) as f64,
                    total_step_flops: total,
                    reduction_vs_p1: total_flop_reduction(&shape, spec.ns_iters, period, opts),
                    allgather_bytes_per_step: allgather_bytes_amortized(&shape, spec.bytes_per_elem, period, opts),
                }
            })
            .collect();
        shapes.push(ShapeReport {
            name: shape.name.clone(),
            total_params: shape.total_params,
            tokens_per_step: shape.tokens_per_step(),
            train_step_flops: train_step_flops(&shape, opts) as f64,
            ns_share: ns_share(&shape, &p1, opts)?,
            allgather_bytes_full: allgather_bytes_per_muon_step(&shape, spec.bytes_per_elem, opts) as f64,
            periods,
            matrices: matrix_breakdown(&shape, &p1, opts),
        });
    }
    Ok(FlopsReport {
        ns_iters: spec.ns_iters,
        shapes,
    })
}
