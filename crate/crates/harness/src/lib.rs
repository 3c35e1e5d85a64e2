//! Experiment harness: configuration files, the training loop with its CSV
//! log, parallel sweeps, summary reports, and the kernel self-check.

pub mod config;
pub mod error;
pub mod oracle;
pub mod reference;
pub mod report;
pub mod reports;
pub mod run;
pub mod sweep;

pub use config::{parse_config, FlopsSpec, RunSpec, SweepSpec, TheorySpec, TrainConfig};
pub use error::{HarnessError, Result};
pub use oracle::{oracle_selfcheck, OracleOptions, OracleReport};
pub use report::{report, Report};
pub use run::{run_training, RunRecord};
pub use sweep::{run_sweep, ExecOrder, SweepResult};
