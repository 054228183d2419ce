//! Experiment orchestration: configuration, runs across methods and seeds,
//! normalization against the local-optimum baseline, and artifacts.

mod artifacts;
mod config;
mod metrics;
mod plot;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentError;
use crate::coordinator::Policy;
use crate::env::EnvError;
use crate::solvers::SolverError;

pub use artifacts::{
    read_csv, read_transcript, write_csv, write_summary, CsvRow, CrossingSummary, MethodSummary, Summary,
    TranscriptRecord, CSV_HEADER, THRESHOLDS,
};
pub use config::{load_config, ConfigOverrides, ExperimentConfig};
pub use metrics::{first_crossing, median, normalize_trajectories, Aggregate};
pub use plot::{emit_svg_plot, render_svg};
pub use run::{
    agent_seed, brute_force_seed, execute, run_experiment, run_isolated_agent, ExperimentOutcome, RunArtifacts,
    RunFailure, RunTrajectory,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("every run failed; first error: {0}")]
    AllRunsFailed(String),
}

/// A search method compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dynamic,
    Passive,
    None,
    BruteForce,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dynamic, Method::Passive, Method::None, Method::BruteForce];

    pub fn policy(self) -> Option<Policy> {
        match self {
            Method::Dynamic => Some(Policy::Dynamic),
            Method::Passive => Some(Policy::Passive),
            Method::None => Some(Policy::None),
            Method::BruteForce => Option::None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Dynamic => "dynamic",
            Method::Passive => "passive",
            Method::None => "none",
            Method::BruteForce => "brute_force",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}
