//! The alternating spectral/sign optimizer, its schedule, and the AdamW
//! fallback for vector parameters.

mod config;
mod schedule;
mod state;
mod step;

pub use config::{AdamWConfig, BranchMode, MomentumForm, NsScaleMode, OptimConfig, Period};
pub use schedule::{lr_multiplier, ScheduleSpec};
pub use state::{Branch, OptimState, ParamGroup, ParamKind};
pub use step::{
    adamw_step, adaptive_branch, clip_global, hb_equivalent_lr, step, StepReport,
};
