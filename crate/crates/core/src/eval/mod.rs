//! Datasets, evaluation modes, reports, trace persistence and the
//! fixed-subset sweep.

mod config;
mod dataset;
mod policy;
mod runner;
pub mod suite;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{parse_cassette_arg, CustomTool, ModelConfig, ModelKind, Pipeline, RunConfig, ToolKind, ToolsConfig};
pub use dataset::{load_dataset, DatasetItem};
pub use policy::PolicyModel;
pub use runner::{
    trace_file_name, AblationReport, Aggregate, CriticSummary, ItemRecord, RunReport, Runtime, SubsetScore, TaskOutcome, Timing,
    ORACLE_VALIDATION,
};

use crate::critic::CriticError;
use crate::model::ModelError;
use crate::toolkit::ConfigError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}:{line}: {message}", path.display())]
    Dataset { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("refusing to report on an empty dataset")]
    EmptyDataset,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Tools(#[from] ConfigError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The profile's direct strategy: one module over the whole video.
    Direct,
    /// One program written up front over all modules.
    SingleProgram,
    /// The iterative agent over all modules.
    Agent,
    /// Every profile strategy, then the critic picks.
    AgentCritic,
    /// The agent rating its own answers until confident.
    SelfEval,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Direct, Mode::SingleProgram, Mode::Agent, Mode::AgentCritic, Mode::SelfEval];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::SingleProgram => "single_program",
            Mode::Agent => "agent",
            Mode::AgentCritic => "agent_critic",
            Mode::SelfEval => "self_eval",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown mode '{s}', expected one of {}", names.join(", "))
            })
    }
}
