//! Config-driven experiments: parse a definition, train every seed, write
//! learning curves as CSV and rank curves against each other.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod metrics;

pub use compare::{compare_curves, CompareReport, Criterion, Curve};
pub use config::{EnvConfig, ExperimentConfig};
pub use experiment::{run_experiment, run_seed, ExperimentReport};
pub use metrics::{moving_average, MetricsTable};
