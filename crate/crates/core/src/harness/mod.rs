//! Configuration-driven experiments, checkers and reports.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod report;

pub use checks::{check_deviation_inequality, check_weak_type_transfer, wilson_upper, JointLaw};
pub use config::{ExperimentConfig, ExperimentKind, Format, ModelSpec};
pub use experiments::{estimate_maximal_norms, run, verify_decomposition_runs, THREADS_ENV};
pub use report::{Record, Report, Verdict};
