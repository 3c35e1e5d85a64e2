use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Linear warmup followed by cosine decay to `floor_fraction`.
///
/// `total_steps = 0` means "not set yet"; the harness fills it from the run
/// length with [`ScheduleSpec::with_total`]. A spec with `warmup_steps = 0`
/// and `floor_fraction = 1` is the constant multiplier 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub floor_fraction: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            warmup_steps: 0,
            total_steps: 0,
            floor_fraction: 1.0,
        }
    }
}

impl ScheduleSpec {
    pub fn constant(total_steps: u64) -> Self {
        Self {
            warmup_steps: 0,
            total_steps,
            floor_fraction: 1.0,
        }
    }

    pub fn cosine(warmup_steps: u64, total_steps: u64, floor_fraction: f64) -> Self {
        Self {
            warmup_steps,
            total_steps,
            floor_fraction,
        }
    }

    /// Fills an unset `total_steps`.
    pub fn with_total(mut self, total_steps: u64) -> Self {
        if self.total_steps == 0 {
            self.total_steps = total_steps;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return invalid("schedule.total_steps must be >= 1");
        }
        if self.warmup_steps >= self.total_steps {
            return invalid(format!(
                "schedule.warmup_steps ({}) must be < total_steps ({})",
                self.warmup_steps, self.total_steps
            ));
        }
        if !(0.0..=1.0).contains(&self.floor_fraction) {
            return invalid(format!(
                "schedule.floor_fraction must lie in [0, 1], got {}",
                self.floor_fraction
            ));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.warmup_steps == 0 && self.floor_fraction == 1.0
    }
}

/// Learning-rate multiplier `s_t ∈ [0, 1]` at step `t`.
pub fn lr_multiplier(schedule: &ScheduleSpec, t: u64) -> Result<f64> {
    schedule.validate()?;
    let ScheduleSpec {
        warmup_steps: w,
        total_steps: total,
        floor_fraction: floor,
    } = *schedule;
    if t >= total {
        return invalid(format!("step {t} is past the schedule end {total}"));
    }
    if t < w {
        return Ok((t + 1) as f64 / w as f64);
    }
    let progress = (t - w) as f64 / (total - w) as f64;
    let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
    Ok(floor + (1.0 - floor) * cosine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_peak_and_midpoint() {
        let s = ScheduleSpec::cosine(4, 12, 0.0);
        assert_eq!(lr_multiplier(&s, 0).unwrap(), 0.25);
        assert_eq!(lr_multiplier(&s, 3).unwrap(), 1.0);
        assert_eq!(lr_multiplier(&s, 4).unwrap(), 1.0);
        assert!((lr_multiplier(&s, 8).unwrap() - 0.5).abs() < 1e-15);
        assert!(lr_multiplier(&s, 12).is_err());
    }

    #[test]
    fn tail_approaches_floor() {
        let s = ScheduleSpec::cosine(10, 1000, 0.0);
        let last = lr_multiplier(&s, 999).unwrap();
        let bound = 0.5 * (1.0 - (std::f64::consts::PI * (1.0 - 1.0 / 990.0)).cos());
        assert!(last <= bound + 1e-15);
        assert!(last < 1e-4);

        let s = ScheduleSpec::cosine(0, 100, 0.1);
        assert!(lr_multiplier(&s, 99).unwrap() >= 0.1);
    }

    #[test]
    fn constant_is_exactly_one() {
        let s = ScheduleSpec::constant(50);
        assert!((0..50).all(|t| lr_multiplier(&s, t).unwrap() == 1.0));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ScheduleSpec::cosine(5, 5, 0.0).validate().is_err());
        assert!(ScheduleSpec::cosine(0, 5, 1.5).validate().is_err());
        assert!(ScheduleSpec::default().validate().is_err());
        assert_eq!(ScheduleSpec::default().with_total(9).total_steps, 9);
    }
}
