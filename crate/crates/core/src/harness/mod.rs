//! Scenario configuration, run orchestration, sweeps and the bundled
//! scenario library.

use thiserror::Error;

use crate::adversary::AdversaryError;
use crate::analysis::AnalysisError;
use crate::dynamics::DynamicsError;
use crate::protocol::ProtocolError;

pub mod config;
pub mod library;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ScenarioConfig, SCENARIO_SCHEMA_VERSION};
pub use report::{build_report, RunReport};
pub use run::{run_scenario, run_scenario_with, simulate, RunOptions, RunOutput};
pub use sweep::{sweep, GridConfig, SweepReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot parse: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("unknown built-in scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
