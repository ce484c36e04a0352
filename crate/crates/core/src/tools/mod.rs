//! The six built-in tools, each with a fixture oracle backend and a
//! model-backed one.

mod basic;
mod model;
mod oracle;
mod text;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use basic::{Finish, GetSegment, Think};
pub use model::{chunk_lines, finding_lines, parse_indices, ModelAsr, ModelFindWhen, ModelRetrievalQa, ModelTools, PromptTool};
pub use oracle::{find_when_oracle, retrieval_oracle, OracleAsr, OracleFindWhen, OracleRetrievalQa};
pub use text::{content_tokens, option_in, range_line, render_options};

use crate::model::ModelClient;
use crate::prompts::Prompts;
use crate::toolkit::{
    ConfigError, ToolRegistry, ASR_UNDERSTANDING, FIND_WHEN, FINISH, GET_SEGMENT, RETRIEVAL_QA, THINK,
};

pub const NO_RANGES: &str = "No relevant ranges found.";
pub const NOT_VISIBLE: &str = "The answer is not visible in this segment.";
pub const NO_SPEECH: &str = "No speech available for this video.";
pub const NO_SPEECH_MATCH: &str = "No relevant speech found in the transcript.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolSettings {
    pub find_when_window: usize,
    pub retrieval_window: usize,
    /// Window step in frames; `None` means non-overlapping windows.
    pub window_stride: Option<usize>,
    pub retrieved_cap: usize,
    pub context_frames: usize,
    pub asr_chunk_chars: usize,
    /// Window requests in flight at once within one tool call.
    pub window_parallelism: usize,
}

impl Default for ToolSettings {
    fn default() -> Self {
        Self {
            find_when_window: 100,
            retrieval_window: 64,
            window_stride: None,
            retrieved_cap: 64,
            context_frames: 56,
            asr_chunk_chars: 48_000,
            window_parallelism: 1,
        }
    }
}

/// Which implementation the video tools use.
#[derive(Clone)]
pub enum ToolBackend {
    Oracle,
    Model(ModelTools),
}

impl ToolBackend {
    pub fn model(client: Arc<ModelClient>, prompts: Arc<Prompts>, settings: ToolSettings) -> Self {
        ToolBackend::Model(ModelTools {
            client,
            prompts,
            settings,
        })
    }
}

/// A registry holding all six built-ins.
pub fn builtin_registry(backend: &ToolBackend) -> Result<ToolRegistry, ConfigError> {
    let mut r = ToolRegistry::new();
    r.register_builtin(THINK, Arc::new(Think))?;
    r.register_builtin(GET_SEGMENT, Arc::new(GetSegment))?;
    match backend {
        ToolBackend::Oracle => {
            r.register_builtin(FIND_WHEN, Arc::new(OracleFindWhen))?;
            r.register_builtin(ASR_UNDERSTANDING, Arc::new(OracleAsr))?;
            r.register_builtin(RETRIEVAL_QA, Arc::new(OracleRetrievalQa))?;
        }
        ToolBackend::Model(m) => {
            r.register_builtin(FIND_WHEN, Arc::new(ModelFindWhen(m.clone())))?;
            r.register_builtin(ASR_UNDERSTANDING, Arc::new(ModelAsr(m.clone())))?;
            r.register_builtin(RETRIEVAL_QA, Arc::new(ModelRetrievalQa(m.clone())))?;
        }
    }
    r.register_builtin(FINISH, Arc::new(Finish))?;
    Ok(r)
}
