//! Configuration, Monte Carlo driver, summaries and file formats.

pub mod config;
pub mod experiment;
pub mod io;
pub mod summary;

pub use config::{EstimatorKind, ExperimentConfig, ResolvedConfig};
pub use experiment::{
    estimate_field, run_experiment, run_experiment_with_faults, ExperimentResult, ReplicateOutcome,
    ReplicateRecord,
};
pub use io::{load_field, logscale_export, save_field};
pub use summary::{summarize, AxisStats, SummaryTable};
