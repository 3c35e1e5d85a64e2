use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::linalg::{NsPreset, DEFAULT_POWER_ITERS};
use crate::optim::schedule::ScheduleSpec;

/// Alternation period: every `P`-th step (starting at 0) is a spectral step.
///
/// `Infinite` never takes the spectral branch. It is a separate variant so
/// that no large integer can accidentally stand in for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Finite(u64),
    Infinite,
}

impl Period {
    pub fn finite(p: u64) -> Result<Self> {
        if p == 0 {
            return invalid("period must be >= 1");
        }
        Ok(Self::Finite(p))
    }

    /// `t mod P = 0`.
    pub fn is_muon_step(self, t: u64) -> bool {
        match self {
            Self::Finite(p) => t % p == 0,
            Self::Infinite => false,
        }
    }

    pub fn as_finite(self) -> Option<u64> {
        match self {
            Self::Finite(p) => Some(p),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Period {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Self::Infinite),
            other => match other.parse::<u64>() {
                Ok(p) => Self::finite(p),
                Err(_) => invalid(format!("cannot parse period {s:?}")),
            },
        }
    }
}

impl Serialize for Period {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(p) => s.serialize_u64(*p),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PeriodVisitor;

        impl Visitor<'_> for PeriodVisitor {
            type Value = Period;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Period, E> {
                Period::finite(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Period, E> {
                if v <= 0 {
                    return Err(E::custom("period must be >= 1"));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Period, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(PeriodVisitor)
    }
}

/// Output scaling of the Newton-Schulz direction on spectral steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsScaleMode {
    #[default]
    None,
    /// Multiply by `0.2·√max(m, n)`.
    MuonRms,
}

impl NsScaleMode {
    pub fn factor(self, rows: usize, cols: usize) -> f64 {
        match self {
            Self::None => 1.0,
            Self::MuonRms => 0.2 * (rows.max(cols) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    #[default]
    Periodic,
    /// Spectral step iff the momentum's stable rank is `≤ α·min(m, n)`.
    Adaptive,
}

/// Momentum parametrization of the persisted buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumForm {
    /// `M ← βM + (1−β)G`.
    #[default]
    Ema,
    /// `M ← βM + G`.
    HeavyBall,
}

/// Settings of the AdamW fallback for 1D parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Hyperparameters of the alternating spectral/sign optimizer.
///
/// The same struct covers every special case: `P = 1` with `β₁ = β₂` is Muon,
/// `P = ∞` with `β₁ = β₂` is Signum, `P = ∞` with `β₁ ≠ β₂` is Lion, and any
/// other `P` gives the alternating variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub period: Period,
    pub eta_m: f64,
    pub eta_l: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub ns_preset: NsPreset,
    pub ns_iters: usize,
    pub ns_scale: NsScaleMode,
    pub clip_global_norm: Option<f64>,
    pub schedule: ScheduleSpec,
    pub branch_mode: BranchMode,
    pub adaptive_alpha: f64,
    pub power_iters: usize,
    pub base_seed: u64,
    pub momentum_form: MomentumForm,
    pub adamw: AdamWConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            period: Period::Finite(2),
            eta_m: 3e-3,
            eta_l: 2e-5,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.0,
            ns_preset: NsPreset::muon_quintic(),
            ns_iters: 5,
            ns_scale: NsScaleMode::None,
            clip_global_norm: None,
            schedule: ScheduleSpec::default(),
            branch_mode: BranchMode::Periodic,
            adaptive_alpha: 0.01,
            power_iters: DEFAULT_POWER_ITERS,
            base_seed: 0,
            momentum_form: MomentumForm::Ema,
            adamw: AdamWConfig::default(),
        }
    }
}

impl OptimConfig {
    /// The full training recipe: cosine schedule with warmup, weight decay 0.1,
    /// clipping 0.5, `K_NS = 5` with RMS-matching output scale, Lion betas.
    pub fn reference_recipe(total_steps: u64) -> Self {
        let warmup = (total_steps * 3 / 64).max(1).min(total_steps.saturating_sub(1));
        Self {
            period: Period::Finite(2),
            eta_m: 3e-3,
            eta_l: 2e-5,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.1,
            ns_scale: NsScaleMode::MuonRms,
            clip_global_norm: Some(0.5),
            schedule: ScheduleSpec {
                warmup_steps: warmup,
                total_steps,
                floor_fraction: 0.0,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn unit_interval(name: &str, v: f64) -> Result<()> {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                invalid(format!("{name} must lie in [0, 1), got {v}"))
            }
        }
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        }
        positive("eta_m", self.eta_m)?;
        positive("eta_l", self.eta_l)?;
        unit_interval("beta1", self.beta1)?;
        unit_interval("beta2", self.beta2)?;
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return invalid(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.ns_iters == 0 {
            return invalid("ns_iters must be >= 1");
        }
        if let Some(c) = self.clip_global_norm {
            positive("clip_global_norm", c)?;
        }
        if self.branch_mode == BranchMode::Adaptive
            && !(self.adaptive_alpha > 0.0 && self.adaptive_alpha <= 1.0)
        {
            return invalid(format!(
                "adaptive_alpha must lie in (0, 1], got {}",
                self.adaptive_alpha
            ));
        }
        if self.power_iters == 0 {
            return invalid("power_iters must be >= 1");
        }
        let (a, b, c) = self.ns_preset.coefficients;
        if ![a, b, c].iter().all(|x| x.is_finite()) {
            return invalid("ns_preset coefficients must be finite");
        }
        positive("adamw.lr", self.adamw.lr)?;
        unit_interval("adamw.beta1", self.adamw.beta1)?;
        unit_interval("adamw.beta2", self.adamw.beta2)?;
        positive("adamw.eps", self.adamw.eps)?;
        self.schedule.validate()
    }
}
