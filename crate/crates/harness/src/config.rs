//! JSON configuration files for the four subcommands.
//!
//! Every struct rejects unknown keys. Parse errors carry the line, column and
//! key path of the offending value.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lmo_core::flops::{FlopOptions, ModelShape};
use lmo_core::optim::{BranchMode, OptimConfig, Period};
use lmo_core::problems::{NoiseSpec, Problem, ProblemSpec};
use lmo_core::theory::{BoundVariant, PhiCriterion, TheoryInputs};

use crate::error::{invalid, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

fn one() -> u64 {
    1
}

fn ten() -> u64 {
    10
}

fn default_name() -> String {
    "run".into()
}

/// One training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub optimizer: OptimConfig,
    pub total_steps: u64,
    /// A CSV row is written every `eval_interval` steps and at the last step.
    #[serde(default = "one")]
    pub eval_interval: u64,
    /// Diagnostic columns are filled every `diag_interval` steps.
    #[serde(default = "ten")]
    pub diag_interval: u64,
    /// Seed of the gradient-noise streams.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub precision: Precision,
}

impl RunSpec {
    pub fn new(problem: ProblemSpec, optimizer: OptimConfig, total_steps: u64) -> Self {
        Self {
            name: default_name(),
            problem,
            noise: NoiseSpec::default(),
            optimizer,
            total_steps,
            eval_interval: 1,
            diag_interval: 10,
            seed: 0,
            output_path: None,
            precision: Precision::F64,
        }
    }

    /// Fills the schedule horizon from `total_steps` when it is unset.
    pub fn normalize(&mut self) {
        if self.optimizer.schedule.total_steps == 0 {
            self.optimizer.schedule = self.optimizer.schedule.clone().with_total(self.total_steps);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_inner(true)
    }

    fn validate_inner(&self, check_period: bool) -> Result<()> {
        if self.total_steps == 0 {
            return invalid("total_steps must be >= 1");
        }
        self.optimizer.validate()?;
        self.noise.validate()?;
        if check_period {
            if let Period::Finite(p) = self.optimizer.period {
                if self.total_steps % p != 0 {
                    return invalid(format!(
                        "total_steps = {} is not divisible by the period P = {p}",
                        self.total_steps
                    ));
                }
            }
        }
        if self.eval_interval == 0 || self.eval_interval > self.total_steps {
            return invalid(format!(
                "eval_interval must lie in [1, total_steps = {}], got {}",
                self.total_steps, self.eval_interval
            ));
        }
        if self.diag_interval == 0 {
            return invalid("diag_interval must be >= 1");
        }
        let horizon = self.optimizer.schedule.total_steps;
        if horizon != 0 && horizon < self.total_steps {
            return invalid(format!(
                "schedule total_steps = {horizon} is shorter than the run ({})",
                self.total_steps
            ));
        }
        Problem::new(&self.problem)?;
        Ok(())
    }
}

/// Grids over the swept hyperparameters. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub period: Vec<Period>,
    pub eta_m: Vec<f64>,
    pub eta_l: Vec<f64>,
    pub adaptive_alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    MinBestLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunSpec,
    #[serde(default)]
    pub axes: SweepAxes,
    #[serde(default)]
    pub selection: Selection,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub period: Period,
    pub eta_m: f64,
    pub eta_l: f64,
    pub adaptive_alpha: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let mut base = self.base.clone();
        base.normalize();
        base.validate_inner(self.axes.period.is_empty())?;
        let a = &self.axes;
        for (name, axis) in [("eta_m", &a.eta_m), ("eta_l", &a.eta_l), ("adaptive_alpha", &a.adaptive_alpha)] {
            if let Some(v) = axis.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return invalid(format!("axis {name} contains the non-positive value {v}"));
            }
        }
        if !a.adaptive_alpha.is_empty() && self.base.optimizer.branch_mode != BranchMode::Adaptive {
            return invalid("an adaptive_alpha axis needs branch_mode = adaptive");
        }
        Ok(())
    }

    /// Cells in row-major order over (period, eta_m, eta_l, adaptive_alpha).
    /// Cell `i` draws its noise from seed `base.seed + i`.
    pub fn cells(&self) -> Vec<SweepCell> {
        fn axis<T: Copy>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let o = &self.base.optimizer;
        let mut out = Vec::new();
        for &period in &axis(&self.axes.period, o.period) {
            for &eta_m in &axis(&self.axes.eta_m, o.eta_m) {
                for &eta_l in &axis(&self.axes.eta_l, o.eta_l) {
                    for &adaptive_alpha in &axis(&self.axes.adaptive_alpha, o.adaptive_alpha) {
                        let index = out.len();
                        out.push(SweepCell {
                            index,
                            period,
                            eta_m,
                            eta_l,
                            adaptive_alpha,
                            seed: self.base.seed.wrapping_add(index as u64),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cell_spec(&self, cell: &SweepCell) -> RunSpec {
        let mut spec = self.base.clone();
        spec.name = format!("{}-cell{}", self.base.name, cell.index);
        spec.optimizer.period = cell.period;
        spec.optimizer.eta_m = cell.eta_m;
        spec.optimizer.eta_l = cell.eta_l;
        spec.optimizer.adaptive_alpha = cell.adaptive_alpha;
        spec.seed = cell.seed;
        spec.output_path = None;
        spec
    }
}

fn default_eps() -> f64 {
    0.1
}

fn default_period() -> Period {
    Period::Finite(2)
}

fn default_alpha_scale() -> f64 {
    150.0
}

fn default_variant() -> BoundVariant {
    BoundVariant::Plain
}

fn default_p_max() -> u64 {
    20
}

/// Inputs of the `φ(P)` scan. Either both ratios are given, or `alpha` is
/// given and the ratios follow from the problem constants as
/// `r_L = L_∞/(α²L₂)` and `r_ρ = ρ₁/(αρ_nuc)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_p_max")]
    pub p_max: u64,
    #[serde(default)]
    pub criterion: PhiCriterion,
}

impl Default for PhiSpec {
    fn default() -> Self {
        Self {
            r_l: None,
            r_rho: None,
            alpha: None,
            p_max: default_p_max(),
            criterion: PhiCriterion::default(),
        }
    }
}

impl PhiSpec {
    pub fn ratios(&self, inputs: &TheoryInputs) -> Result<(f64, f64)> {
        match (self.r_l, self.r_rho, self.alpha) {
            (Some(r_l), Some(r_rho), _) => Ok((r_l, r_rho)),
            (r_l, r_rho, Some(a)) if a >= 1.0 => Ok((
                r_l.unwrap_or(inputs.linf / (a * a * inputs.l2)),
                r_rho.unwrap_or(inputs.rho_1 / (a * inputs.rho_nuc)),
            )),
            (_, _, Some(a)) => invalid(format!("phi.alpha must be >= 1, got {a}")),
            _ => invalid("phi needs r_l and r_rho, or alpha"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub inputs: TheoryInputs,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_period")]
    pub period: Period,
    /// Ratio `η_M/η_L` of the parameter choice.
    #[serde(default = "default_alpha_scale")]
    pub alpha_scale: f64,
    #[serde(default = "default_variant")]
    pub variant: BoundVariant,
    #[serde(default)]
    pub phi: PhiSpec,
}

impl TheorySpec {
    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return invalid(format!("eps must be positive, got {}", self.eps));
        }
        if self.phi.p_max < 2 {
            return invalid("phi.p_max must be >= 2");
        }
        self.phi.ratios(&self.inputs)?;
        Ok(())
    }
}

fn default_vocab() -> u64 {
    50_304
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// One of `124M`, `355M`, `720M`.
    Preset { name: String },
    Gpt2Like {
        name: String,
        layers: u64,
        dim: u64,
        seq_len: u64,
        batch: u64,
        #[serde(default = "default_vocab")]
        vocab: u64,
    },
    Custom(ModelShape),
}

impl ShapeSpec {
    pub fn resolve(&self) -> Result<ModelShape> {
        let shape = match self {
            Self::Preset { name } => match ModelShape::preset(name) {
                Some(s) => s,
                None => return invalid(format!("unknown shape preset {name:?}")),
            },
            Self::Gpt2Like {
                name,
                layers,
                dim,
                seq_len,
                batch,
                vocab,
            } => ModelShape::gpt2_like(name.clone(), *layers, *dim, *seq_len, *batch, *vocab),
            Self::Custom(s) => s.clone(),
        };
        shape.validate()?;
        Ok(shape)
    }
}

fn default_ns_iters() -> usize {
    5
}

fn default_periods() -> Vec<Period> {
    vec![Period::Finite(1), Period::Finite(2), Period::Finite(5), Period::Infinite]
}

fn default_bytes() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopsSpec {
    pub shapes: Vec<ShapeSpec>,
    #[serde(default = "default_ns_iters")]
    pub ns_iters: usize,
    #[serde(default = "default_periods")]
    pub periods: Vec<Period>,
    #[serde(default)]
    pub options: FlopOptions,
    /// Element width for the all-gather estimate.
    #[serde(default = "default_bytes")]
    pub bytes_per_elem: u64,
}

impl FlopsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return invalid("flops config needs at least one shape");
        }
        if self.ns_iters == 0 {
            return invalid("ns_iters must be >= 1");
        }
        for s in &self.shapes {
            s.resolve()?;
        }
        Ok(())
    }
}

/// A parsed `run` or `sweep` file.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainConfig {
    Run(RunSpec),
    Sweep(SweepSpec),
}

/// Deserializes `text` with key-path context in errors and no trailing data.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let wrap = |key: String, e: serde_json::Error| HarnessError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        key,
        message: e.to_string(),
    };
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        wrap(key, e.into_inner())
    })?;
    de.end().map_err(|e| wrap(".".into(), e))?;
    Ok(value)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and validates a run or sweep config. Files with a top-level
/// `base` key are sweeps.
pub fn parse_train_str(path: &Path, text: &str) -> Result<TrainConfig> {
    let is_sweep = serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key("base")))
        .unwrap_or(false);
    if is_sweep {
        let mut spec: SweepSpec = parse_json(path, text)?;
        spec.base.normalize();
        spec.validate()?;
        Ok(TrainConfig::Sweep(spec))
    } else {
        let mut spec: RunSpec = parse_json(path, text)?;
        spec.normalize();
        spec.validate()?;
        Ok(TrainConfig::Run(spec))
    }
}

pub fn parse_config(path: &Path) -> Result<TrainConfig> {
    parse_train_str(path, &read(path)?)
}

pub fn parse_theory(path: &Path) -> Result<TheorySpec> {
    let spec: TheorySpec = parse_json(path, &read(path)?)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_flops(path: &Path) -> Result<FlopsSpec> {
    let spec: FlopsSpec = parse_json(path, &read(path)?)?;
    spec.validate()?;
    Ok(spec)
}
