//! Config-driven experiment sweeps and result summaries.

pub mod config;
pub mod experiment;
pub mod summary;

pub use config::{parse_config, read_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, ResultRow, RESULTS_HEADER, RESULTS_VERSION_LINE};
pub use summary::{parse_results, summarize, Summary};
