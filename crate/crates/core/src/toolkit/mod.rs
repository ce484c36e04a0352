//! Tool metadata, the registry, API text for prompts, and strategy subsets.

mod profile;
mod registry;
mod spec;

pub use profile::{enumerate_fixed_subsets, strategy_subsets, Profile, StrategyLabel, StrategySubset, SubsetTemplate};
pub use registry::{bind_args, ActiveTools, EpisodeContext, Tool, ToolArgs, ToolCall, ToolRegistry};
pub use spec::{
    api_preamble, builtin_spec, module_api_listing, ModuleSpec, ParamSpec, ParamType, ASR_UNDERSTANDING,
    BUILTIN_ORDER, FIND_WHEN, FINISH, GET_SEGMENT, RETRIEVAL_QA, THINK,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown module '{0}'")]
    UnknownModule(String),
    #[error("tool '{0}' is already registered")]
    DuplicateTool(String),
    #[error("'{0}' is a built-in name and its signature or docstring differs")]
    ReservedMismatch(String),
    #[error("tool '{0}' has an empty docstring")]
    EmptyDoc(String),
    #[error("invalid identifier '{0}'")]
    InvalidName(String),
    #[error("strategy {0} has no modules")]
    EmptySubset(StrategyLabel),
    #[error("module '{0}' has no backend")]
    MissingBackend(String),
    #[error("direct strategy {0} must name exactly one answer-capable module")]
    BadDirectSubset(StrategyLabel),
}
