//! Aggregation of finished runs into comparison tables.

use serde::{Deserialize, Serialize};

use lmo_core::optim::Period;
use lmo_core::theory::{classify, scan_optimal_p, CaseLabel, PhiCriterion};

use crate::error::{invalid, Result};
use crate::run::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub period: Period,
    pub best_loss: f64,
    pub final_loss: f64,
    pub total_flops: f64,
    pub steps_to_target: Option<u64>,
    pub flops_to_target: Option<f64>,
    pub failed: bool,
}

/// Inputs of the predicted period curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiInputs {
    pub r_l: f64,
    pub r_rho: f64,
    pub kappa: f64,
    pub k_ns: u64,
    pub p_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiComparison {
    pub predicted_p_star: u64,
    pub predicted_case: CaseLabel,
    /// Period with the fewest FLOPs to the target loss.
    pub empirical_best: Option<Period>,
    /// Shape of FLOPs-to-target over increasing `P`.
    pub empirical_case: Option<CaseLabel>,
    /// `(P, FLOPs to target)` in increasing `P`.
    pub curve: Vec<(Period, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub target_loss: Option<f64>,
    /// Sorted by best loss, then FLOPs, then label.
    pub rows: Vec<ReportRow>,
    pub phi: Option<PhiComparison>,
}

fn period_rank(p: Period) -> (u8, u64) {
    match p {
        Period::Finite(p) => (0, p),
        Period::Infinite => (1, 0),
    }
}

pub fn report(records: &[RunRecord], target_loss: Option<f64>, phi: Option<PhiInputs>) -> Result<Report> {
    if records.is_empty() {
        return invalid("report needs at least one record");
    }
    let mut rows: Vec<ReportRow> = records
        .iter()
        .map(|r| {
            let s = &r.summary;
            ReportRow {
                label: s.name.clone(),
                period: s.period,
                best_loss: s.best_loss,
                final_loss: s.final_loss,
                total_flops: s.total_flops,
                steps_to_target: target_loss.and_then(|t| r.steps_to(t)),
                flops_to_target: target_loss.and_then(|t| r.flops_to(t)),
                failed: r.failed(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.best_loss
            .total_cmp(&b.best_loss)
            .then(a.total_flops.total_cmp(&b.total_flops))
            .then_with(|| a.label.cmp(&b.label))
            .then(period_rank(a.period).cmp(&period_rank(b.period)))
    });

    let phi = match phi {
        Some(p) => Some(compare_phi(&rows, p)?),
        None => None,
    };
    Ok(Report {
        target_loss,
        rows,
        phi,
    })
}

fn compare_phi(rows: &[ReportRow], p: PhiInputs) -> Result<PhiComparison> {
    let scan = scan_optimal_p(p.r_l, p.r_rho, p.kappa, p.k_ns, p.p_max, PhiCriterion::Approx)?;
    let mut curve: Vec<(Period, Option<f64>)> = Vec::new();
    let mut by_period: Vec<&ReportRow> = rows.iter().collect();
    by_period.sort_by(|a, b| period_rank(a.period).cmp(&period_rank(b.period)));
    for r in by_period {
        // Several records at one period keep the cheapest.
        match curve.last_mut() {
            Some((q, f)) if *q == r.period => {
                if let Some(x) = r.flops_to_target {
                    *f = Some(f.map_or(x, |y: f64| y.min(x)));
                }
            }
            _ => curve.push((r.period, r.flops_to_target)),
        }
    }
    let empirical_best = curve
        .iter()
        .filter_map(|&(q, f)| f.map(|f| (q, f)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(period_rank(a.0).cmp(&period_rank(b.0))))
        .map(|(q, _)| q);
    let empirical_case = if curve.len() >= 2 {
        let values: Vec<f64> = curve.iter().map(|&(_, f)| f.unwrap_or(f64::INFINITY)).collect();
        Some(classify(&values))
    } else {
        None
    };
    Ok(PhiComparison {
        predicted_p_star: scan.p_star,
        predicted_case: scan.case_label,
        empirical_best,
        empirical_case,
        curve,
    })
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,P,best_loss,final_loss,total_flops,steps_to_target,flops_to_target,failed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.label,
                r.period,
                r.best_loss,
                r.final_loss,
                r.total_flops,
                r.steps_to_target.map(|v| v.to_string()).unwrap_or_default(),
                r.flops_to_target.map(|v| v.to_string()).unwrap_or_default(),
                r.failed
            ));
        }
        out
    }

    /// Fixed-width table for the terminal.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<24} {:>5} {:>14} {:>14} {:>14} {:>12}\n",
            "label", "P", "best_loss", "final_loss", "total_flops", "steps_to_tgt"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>12}\n",
                r.label,
                r.period.to_string(),
                r.best_loss,
                r.final_loss,
                r.total_flops,
                fmt_opt(&r.steps_to_target)
            ));
        }
        if let Some(p) = &self.phi {
            out.push_str(&format!(
                "predicted P* = {} ({}), empirical best = {} ({})\n",
                p.predicted_p_star,
                p.predicted_case.as_str(),
                fmt_opt(&p.empirical_best),
                p.empirical_case.map(CaseLabel::as_str).unwrap_or("-")
            ));
        }
        out
    }
}
