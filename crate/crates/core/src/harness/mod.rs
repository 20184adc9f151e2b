//! Evaluation, experiment runs and report output.

pub mod experiment;
pub mod metrics;
pub mod report;
pub mod synthetic;

pub use experiment::{
    labeled_quantity_sweep, run_experiment, unlabeled_quantity_sweep, ExperimentConfig, Prepared, Task,
};
pub use report::{emit_report, RunReport, TrialResult};
