//! Grid sweeps over `(P, η_M, η_L, α)`.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lmo_core::optim::Period;

use crate::config::{SweepCell, SweepSpec};
use crate::error::{HarnessError, Result};
use crate::run::{run_training, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok(RunSummary),
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: SweepCell,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn best_loss(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok(s) if s.failure.is_none() && s.best_loss.is_finite() => Some(s.best_loss),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by cell index.
    pub cells: Vec<CellResult>,
    pub best: Option<usize>,
}

/// Execution order of the cells; results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecOrder {
    Parallel,
    Sequential,
    Reversed,
}

fn period_key(p: Period) -> f64 {
    match p {
        Period::Finite(p) => p as f64,
        Period::Infinite => f64::INFINITY,
    }
}

/// Lowest best loss; ties go to smaller `η_M`, then `η_L`, then `P`.
fn compare(a: &CellResult, b: &CellResult) -> Ordering {
    let key = |c: &CellResult| {
        [
            c.best_loss().unwrap_or(f64::INFINITY),
            c.cell.eta_m,
            c.cell.eta_l,
            period_key(c.cell.period),
            c.cell.adaptive_alpha,
        ]
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(a.cell.index.cmp(&b.cell.index))
}

pub fn select_best(cells: &[CellResult]) -> Option<usize> {
    cells
        .iter()
        .filter(|c| c.best_loss().is_some())
        .min_by(|a, b| compare(a, b))
        .map(|c| c.cell.index)
}

fn run_cell(spec: &SweepSpec, cell: &SweepCell, out_dir: Option<&Path>) -> CellResult {
    let run = spec.cell_spec(cell);
    let csv = out_dir.map(|d| d.join(format!("cell_{:04}.csv", cell.index)));
    let outcome = match run_training(&run, csv.as_deref()) {
        Ok(rec) => CellOutcome::Ok(rec.summary),
        Err(e) => CellOutcome::Failed {
            message: e.to_string(),
        },
    };
    CellResult {
        cell: cell.clone(),
        outcome,
    }
}

/// Runs every cell; failing cells are recorded, not fatal.
pub fn run_sweep(spec: &SweepSpec, out_dir: Option<&Path>, order: ExecOrder) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let mut results: Vec<CellResult> = match order {
        ExecOrder::Parallel => cells.par_iter().map(|c| run_cell(spec, c, out_dir)).collect(),
        ExecOrder::Sequential => cells.iter().map(|c| run_cell(spec, c, out_dir)).collect(),
        ExecOrder::Reversed => cells.iter().rev().map(|c| run_cell(spec, c, out_dir)).collect(),
    };
    results.sort_by_key(|r| r.cell.index);
    let best = select_best(&results);
    Ok(SweepResult { cells: results, best })
}

/// Heat table: one line per cell with its axes, status and losses.
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut text = String::from("cell,P,eta_m,eta_l,adaptive_alpha,seed,status,best_loss,final_loss,total_flops\n");
    for r in &result.cells {
        let c = &r.cell;
        let tail = match &r.outcome {
            CellOutcome::Ok(s) if s.failure.is_none() => {
                format!("ok,{},{},{}", s.best_loss, s.final_loss, s.total_flops)
            }
            CellOutcome::Ok(s) => format!("failed,{},{},{}", s.best_loss, s.final_loss, s.total_flops),
            CellOutcome::Failed { .. } => "failed,,,".to_string(),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{},{tail}\n",
            c.index, c.period, c.eta_m, c.eta_l, c.adaptive_alpha, c.seed
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(index: usize, loss: Option<f64>, eta_m: f64, period: Period) -> CellResult {
        let outcome = match loss {
            Some(l) => CellOutcome::Ok(RunSummary {
                name: String::new(),
                period,
                eta_m,
                eta_l: 1e-5,
                steps_completed: 1,
                initial_loss: 1.0,
                best_loss: l,
                final_loss: l,
                total_flops: 0.0,
                muon_steps: 0,
                lion_steps: 0,
                max_wnorm_inf: 0.0,
                wall_time_s: 0.0,
                failure: None,
            }),
            None => CellOutcome::Failed {
                message: "x".into(),
            },
        };
        CellResult {
            cell: SweepCell {
                index,
                period,
                eta_m,
                eta_l: 1e-5,
                adaptive_alpha: 0.01,
                seed: 0,
            },
            outcome,
        }
    }

    #[test]
    fn ties_prefer_small_eta_then_small_period() {
        let cells = vec![
            cell(0, Some(1.0), 3e-3, Period::Finite(1)),
            cell(1, Some(0.5), 2e-3, Period::Infinite),
            cell(2, Some(0.5), 2e-3, Period::Finite(2)),
            cell(3, Some(0.5), 5e-3, Period::Finite(1)),
            cell(4, None, 1e-3, Period::Finite(1)),
        ];
        assert_eq!(select_best(&cells), Some(2));
        assert_eq!(select_best(&cells[4..]), None);
    }
}
