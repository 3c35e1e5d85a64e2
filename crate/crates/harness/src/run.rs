//! The training loop and its CSV log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use lmo_core::diagnostics::{noise_level_hat, DiagRecord, NoiseNorm};
use lmo_core::linalg::{inf_norm, l1_norm, nuclear_norm, Matrix};
use lmo_core::optim::{lr_multiplier, step, Branch, BranchMode, OptimState, ParamKind, Period};
use lmo_core::problems::{Problem, ProblemSpec};
use lmo_core::{Error as CoreError, Scalar};

use crate::config::{Precision, RunSpec};
use crate::error::{HarnessError, Result};

pub const CSV_VERSION_LINE: &str = "# lmo-optim csv v1";

pub const CSV_COLUMNS: [&str; 14] = [
    "step",
    "loss",
    "lr_mult",
    "branch",
    "grad_nuc",
    "grad_l1",
    "period_metric",
    "cum_flops",
    "wnorm_inf",
    "alpha_ratio",
    "rho_nuc_hat",
    "rho_1_hat",
    "L2_hat",
    "Linf_hat",
];

/// One logged step. Losses and gradient norms refer to the iterate before
/// the step; `wnorm_inf` and `cum_flops` to the state after it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: u64,
    pub loss: f64,
    pub lr_mult: f64,
    pub branch: Option<Branch>,
    pub grad_nuc: Option<f64>,
    pub grad_l1: f64,
    /// Set on the step that closes a period.
    pub period_metric: Option<f64>,
    pub cum_flops: f64,
    pub wnorm_inf: f64,
    pub diag: Option<DiagRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub period: Period,
    pub eta_m: f64,
    pub eta_l: f64,
    pub steps_completed: u64,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub final_loss: f64,
    pub total_flops: f64,
    pub muon_steps: u64,
    pub lion_steps: u64,
    pub max_wnorm_inf: f64,
    pub wall_time_s: f64,
    pub failure: Option<Failure>,
}

/// Everything a run produced. `losses[t]` is `f(W_t)` for `t = 0..=T` and
/// `cum_flops[t]` the cost spent to reach `W_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub rows: Vec<StepRow>,
    pub losses: Vec<f64>,
    pub cum_flops: Vec<f64>,
    /// `(closing step, metric)` for every completed period.
    pub period_metrics: Vec<(u64, f64)>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.summary.failure.is_some()
    }

    /// First step whose loss is at most `target`.
    pub fn steps_to(&self, target: f64) -> Option<u64> {
        self.losses.iter().position(|&l| l <= target).map(|t| t as u64)
    }

    pub fn flops_to(&self, target: f64) -> Option<f64> {
        self.steps_to(target).map(|t| self.cum_flops[t as usize])
    }

    /// Running minimum of the period metric, one entry per period.
    pub fn running_min_metric(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.period_metrics
            .iter()
            .map(|&(_, m)| {
                best = best.min(m);
                best
            })
            .collect()
    }

    /// Fraction of matrix-parameter steps that took the spectral branch.
    pub fn muon_fraction(&self) -> f64 {
        let s = &self.summary;
        let total = s.muon_steps + s.lion_steps;
        if total == 0 {
            0.0
        } else {
            s.muon_steps as f64 / total as f64
        }
    }
}

/// Incremental CSV writer; every row is flushed so a killed run leaves a
/// parseable prefix.
pub struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut sink = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        sink.line(&format!("{CSV_VERSION_LINE}\n{}", CSV_COLUMNS.join(",")))?;
        Ok(sink)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }

    pub fn row(&mut self, r: &StepRow) -> Result<()> {
        let d = r.diag.as_ref();
        let fields = [
            r.step.to_string(),
            r.loss.to_string(),
            r.lr_mult.to_string(),
            r.branch.map(Branch::as_str).unwrap_or("").to_string(),
            opt(r.grad_nuc),
            r.grad_l1.to_string(),
            opt(r.period_metric),
            r.cum_flops.to_string(),
            r.wnorm_inf.to_string(),
            opt(d.and_then(|d| d.alpha_ratio)),
            opt(d.and_then(|d| d.rho_nuc_hat)),
            opt(d.and_then(|d| d.rho_1_hat)),
            opt(d.and_then(|d| d.l2_hat)),
            opt(d.and_then(|d| d.linf_hat)),
        ];
        self.line(&fields.join(","))
    }

    pub fn failure(&mut self, f: &Failure) -> Result<()> {
        let msg = f.message.replace(['\n', ','], " ");
        self.line(&format!("# failure,step={},message={msg}", f.step))
    }
}

/// Approximate cost of one gradient evaluation: `6·params·samples`, with a
/// single sample for the quadratic.
pub fn gradient_flops(problem: &Problem) -> f64 {
    let params: usize = problem.param_shapes().iter().map(|s| s.rows * s.cols).sum();
    let samples = match problem.spec() {
        ProblemSpec::QuadraticDiag(_) => 1,
        ProblemSpec::Logistic(s) => s.samples,
        ProblemSpec::Mlp2(s) => s.samples,
    };
    6.0 * (params * samples) as f64
}

/// Runs the training loop, streaming rows to `csv` when given.
pub fn run_training(spec: &RunSpec, csv: Option<&Path>) -> Result<RunRecord> {
    let mut spec = spec.clone();
    spec.normalize();
    spec.validate()?;
    let mut sink = csv.map(CsvSink::create).transpose()?;
    match spec.precision {
        Precision::F64 => run_generic::<f64>(&spec, sink.as_mut()),
        Precision::F32 => run_generic::<f32>(&spec, sink.as_mut()),
    }
}

fn non_finite(e: &HarnessError) -> bool {
    matches!(e, HarnessError::Core(CoreError::NonFinite(_)))
}

struct PeriodWindow {
    weighted: f64,
    weight: f64,
}

fn run_generic<T: Scalar>(spec: &RunSpec, mut sink: Option<&mut CsvSink>) -> Result<RunRecord> {
    let started = Instant::now();
    let cfg = &spec.optimizer;
    let problem = Problem::new(&spec.problem)?;
    let mut params = problem.init_params::<T>();
    let mut state = OptimState::new(&params)?;
    let matrices: Vec<usize> = (0..params.len())
        .filter(|&i| params[i].kind == ParamKind::Matrix2d)
        .collect();
    let primary = matrices[0];
    let grad_cost = gradient_flops(&problem);
    let per_step_window = cfg.period.is_infinite() || cfg.branch_mode == BranchMode::Adaptive;
    let closes_period = |t: u64| match cfg.period {
        _ if per_step_window => true,
        Period::Finite(p) => t % p == p - 1,
        Period::Infinite => true,
    };

    let mut rows = Vec::new();
    let mut losses = Vec::with_capacity(spec.total_steps as usize + 1);
    let mut cum_flops = vec![0.0];
    let mut period_metrics = Vec::new();
    let mut window = PeriodWindow {
        weighted: 0.0,
        weight: 0.0,
    };
    let mut prev: Option<(Matrix<T>, Matrix<T>)> = None;
    let (mut muon_steps, mut lion_steps) = (0u64, 0u64);
    let mut max_wnorm = params
        .iter()
        .filter(|p| p.kind == ParamKind::Matrix2d)
        .map(|p| inf_norm(&p.value).to_f64_lossy())
        .fold(0.0, f64::max);
    let mut failure = None;
    let mut cum = 0.0;

    for t in 0..spec.total_steps {
        let values: Vec<Matrix<T>> = params.iter().map(|p| p.value.clone()).collect();
        let (loss, exact, noisy) = problem.stochastic_grad(&values, &spec.noise, spec.seed, t)?;
        let loss = loss.to_f64_lossy();
        if !loss.is_finite() {
            failure = Some(Failure {
                step: t,
                message: format!("non-finite loss {loss}"),
            });
            break;
        }
        losses.push(loss);

        let s = lr_multiplier(&cfg.schedule, t)?;
        let log_row = t % spec.eval_interval == 0 || t + 1 == spec.total_steps;
        let diag_due = t % spec.diag_interval == 0;
        let momentum = diag_due.then(|| state.momentum(&params[primary].id).cloned()).flatten();

        params.iter_mut().zip(noisy.iter()).for_each(|(p, g)| p.grad = g.clone());
        let report = match step(&mut state, &mut params, cfg).map_err(HarnessError::from) {
            Ok(r) => r,
            Err(e) if non_finite(&e) => {
                failure = Some(Failure {
                    step: t,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(p) = params.iter().find(|p| !p.value.as_slice().iter().all(|x| x.is_finite())) {
            failure = Some(Failure {
                step: t,
                message: format!("non-finite iterate in {}", p.id),
            });
            break;
        }
        let branch = report.branches[primary];
        match branch {
            Some(Branch::Muon) => muon_steps += 1,
            Some(Branch::Lion) => lion_steps += 1,
            None => {}
        }

        let muon_now = branch == Some(Branch::Muon);
        let grad_l1: f64 = matrices.iter().map(|&i| l1_norm(&exact[i]).to_f64_lossy()).sum();
        let grad_nuc = (log_row || muon_now)
            .then(|| matrices.iter().map(|&i| nuclear_norm(&exact[i]).to_f64_lossy()).sum::<f64>());
        let (eta, norm) = match (muon_now, grad_nuc) {
            (true, Some(n)) => (cfg.eta_m * s, n),
            _ => (cfg.eta_l * s, grad_l1),
        };
        window.weighted += eta * norm;
        window.weight += eta;
        let period_metric = if closes_period(t) {
            let m = window.weighted / window.weight;
            window = PeriodWindow {
                weighted: 0.0,
                weight: 0.0,
            };
            period_metrics.push((t, m));
            Some(m)
        } else {
            None
        };

        cum += report.optimizer_flops + grad_cost;
        cum_flops.push(cum);
        let wnorm_inf = matrices
            .iter()
            .map(|&i| inf_norm(&params[i].value).to_f64_lossy())
            .fold(0.0, f64::max);
        max_wnorm = max_wnorm.max(wnorm_inf);

        let w_prev = &values[primary];
        let diag = if diag_due {
            let m = momentum.unwrap_or_else(|| Matrix::zeros(w_prev.rows(), w_prev.cols()));
            let pair = prev.as_ref().map(|(g, w)| (g, w));
            let mut d = DiagRecord::compute(t, &exact[primary], &m, pair, w_prev, loss, cum)?;
            let rho = |which| {
                noise_level_hat(&noisy[primary], &m, which)
                    .ok()
                    .map(|v| v.to_f64_lossy())
            };
            d.rho_nuc_hat = rho(NoiseNorm::Nuc);
            d.rho_1_hat = rho(NoiseNorm::L1);
            Some(d)
        } else {
            None
        };
        prev = Some((exact[primary].clone(), w_prev.clone()));

        if log_row {
            let row = StepRow {
                step: t,
                loss,
                lr_mult: s,
                branch,
                grad_nuc,
                grad_l1,
                period_metric,
                cum_flops: cum,
                wnorm_inf,
                diag,
            };
            if let Some(sink) = sink.as_deref_mut() {
                sink.row(&row)?;
            }
            rows.push(row);
        }
    }

    if failure.is_none() {
        let values: Vec<Matrix<T>> = params.iter().map(|p| p.value.clone()).collect();
        let last = problem.loss(&values)?.to_f64_lossy();
        if last.is_finite() {
            losses.push(last);
        } else {
            failure = Some(Failure {
                step: spec.total_steps,
                message: format!("non-finite final loss {last}"),
            });
        }
    }
    if let (Some(f), Some(sink)) = (&failure, sink.as_deref_mut()) {
        sink.failure(f)?;
    }
    cum_flops.truncate(losses.len().max(1));

    let best_loss = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = RunSummary {
        name: spec.name.clone(),
        period: cfg.period,
        eta_m: cfg.eta_m,
        eta_l: cfg.eta_l,
        steps_completed: state.step_count(),
        initial_loss: losses.first().copied().unwrap_or(f64::NAN),
        best_loss,
        final_loss: losses.last().copied().unwrap_or(f64::NAN),
        total_flops: cum,
        muon_steps,
        lion_steps,
        max_wnorm_inf: max_wnorm,
        wall_time_s: started.elapsed().as_secs_f64(),
        failure,
    };
    Ok(RunRecord {
        spec: spec.clone(),
        rows,
        losses,
        cum_flops,
        period_metrics,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lmo_core::optim::OptimConfig;
    use lmo_core::problems::{CurvatureSpec, TargetSpec};

    fn quad_spec(period: Period, steps: u64) -> RunSpec {
        let problem = ProblemSpec::quadratic(
            4,
            4,
            CurvatureSpec::Constant { value: 1.0 },
            TargetSpec::Gaussian { scale: 1.0 },
            1,
        );
        let optimizer = OptimConfig {
            period,
            eta_m: 0.05,
            eta_l: 0.01,
            ..OptimConfig::default()
        };
        RunSpec::new(problem, optimizer, steps)
    }

    #[test]
    fn records_every_step_and_period() {
        let mut spec = quad_spec(Period::Finite(2), 10);
        spec.diag_interval = 1;
        let rec = run_training(&spec, None).unwrap();
        assert_eq!(rec.rows.len(), 10);
        assert_eq!(rec.losses.len(), 11);
        assert_eq!(rec.cum_flops.len(), 11);
        assert_eq!(rec.period_metrics.len(), 5);
        assert_eq!((rec.summary.muon_steps, rec.summary.lion_steps), (5, 5));
        assert!(rec.rows.windows(2).all(|w| w[0].step < w[1].step));
        assert!(rec.cum_flops.windows(2).all(|w| w[0] <= w[1]));
        assert!(rec.rows[0].diag.is_some());
        assert!(rec.rows[0].diag.as_ref().unwrap().l2_hat.is_none());
        assert!(rec.rows[1].diag.as_ref().unwrap().l2_hat.is_some());
    }

    #[test]
    fn period_metric_matches_core_formula_for_constant_lr() {
        let rec = run_training(&quad_spec(Period::Finite(2), 4), None).unwrap();
        let r = &rec.rows;
        let expect = lmo_core::diagnostics::period_avg_grad_metric(
            &[r[0].grad_nuc.unwrap(), r[1].grad_l1],
            0.05,
            0.01,
            2,
        )
        .unwrap();
        assert!((rec.period_metrics[0].1 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn divergence_becomes_a_failure_record() {
        let mut spec = quad_spec(Period::Finite(1), 50);
        spec.problem = ProblemSpec::quadratic(
            2,
            2,
            CurvatureSpec::Constant { value: 1e300 },
            TargetSpec::Gaussian { scale: 1e10 },
            1,
        );
        let rec = run_training(&spec, None).unwrap();
        let f = rec.summary.failure.expect("failure expected");
        assert_eq!(f.step, 0);
    }

    #[test]
    fn f32_run_completes() {
        let mut spec = quad_spec(Period::Finite(2), 20);
        spec.precision = Precision::F32;
        let rec = run_training(&spec, None).unwrap();
        assert!(!rec.failed());
        assert!(rec.summary.final_loss < rec.summary.initial_loss);
    }
}
