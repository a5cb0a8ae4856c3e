//! Dataset parsing, run configuration, and metrics persistence.

pub mod config;
pub mod libsvm;
pub mod metrics;

pub use config::{load_config, load_config_str, RunConfig, SolverKind};
pub use libsvm::{parse_libsvm, parse_libsvm_str, write_libsvm};
pub use metrics::{read_metrics_csv, write_metrics_csv, MetricsRecord};
