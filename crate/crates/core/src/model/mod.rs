//! Model access: requests made of text and frame references, a client that
//! enforces the frame budget, scripted and HTTP backends, and cassettes.

mod cassette;
mod client;
mod http;
mod request;

use thiserror::Error;

pub use cassette::{Cassette, CassetteEntry, CassetteMode, Divergence};
pub use client::{FnModel, ModelBackend, ModelClient, RetryPolicy, RoutedModel, ScriptedModel};
pub use http::{HttpBackend, HttpConfig};
pub use request::{
    budget_frames, fingerprint, ModelRequest, PromptPart, DEFAULT_FRAME_BUDGET, DEFAULT_MAX_OUTPUT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("request carries {frames} frames, over the budget of {budget}")]
    BudgetExceeded { frames: usize, budget: usize },
    /// Worth retrying: timeouts, connection resets, 429 and 5xx.
    #[error("transient transport error: {0}")]
    Transient(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scripted model has no response left for `{0}`")]
    Exhausted(String),
    #[error("replay divergence: {0}")]
    ReplayDivergence(Divergence),
    #[error("model configuration error: {0}")]
    Config(String),
}
