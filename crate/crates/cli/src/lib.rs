//! Configuration, scenario orchestration and CSV output for `qtraj`.

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{load_config, RunConfig};
pub use output::{Assertion, ScenarioResult, Table};
pub use scenarios::{run_scenario, SCENARIOS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] qtraj_thermo::Error),
}
