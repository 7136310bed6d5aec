//! Experiment wiring behind the `faultchain` binary: configuration, the
//! enumerate/train/baseline commands and run reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{Baseline, ExperimentConfig};
pub use report::{cmd_report, LabeledRun};
pub use run::{cmd_baseline, cmd_enumerate, cmd_train, RunReport};
