//! Discrete-event simulation of the marketplace.

mod config;
mod engine;
mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::contract::ContractError;
use crate::data::DataError;
use crate::model::ModelError;

pub use config::{AgentFile, ContractFile, DatasetFile, DatasetSource, ScenarioConfig, ScenarioFile};
pub use engine::{baseline_accuracy, prepare, run, Prepared};
pub use report::{compute_gap, time_to_drain, SimulationReport, Snapshot, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config invalid: {0}")]
    InvalidConfig(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("accuracy out of range")]
    AccuracyOutOfRange,
    #[error("unknown agent {0}")]
    UnknownAgent(String),
}
