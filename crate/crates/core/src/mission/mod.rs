//! Closed-loop mission runs: scenario files, the onboard agents, the master
//! on its base station and the simulated world tied together over the bus.

mod agent;
mod config;
mod run;
mod scenarios;
mod telemetry;

pub use agent::{Agent, AgentOutput, Ctx, Sensed};
pub use config::{
    AgentConfig, AvoidScenario, ControlConfig, FaultConfig, FenceScenario, GrabScenario, GuidanceConfig, ResetFault,
    SafetyConfig, ScenarioConfig, TimedFault, TrackScenario,
};
pub use run::{Mission, MissionSummary};
pub use scenarios::{
    run_avoid, run_fence, run_grab, run_pop, run_track, AvoidReport, FenceReport, GrabReport, TrackReport,
};
pub use telemetry::{write_csv, CsvRow, EventRow, TelemetryRow, TraceRow};

use thiserror::Error;

use crate::oms::OmsError;
use crate::safety::SafetyError;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("scenario field `{path}` (line {line}, column {column}): {message}")]
    Config { path: String, line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Oms(#[from] OmsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<std::io::Error> for MissionError {
    fn from(e: std::io::Error) -> Self {
        MissionError::Io(e.to_string())
    }
}
