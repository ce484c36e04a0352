use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::policy::PolicyModel;
use super::{EvalError, Mode};
use crate::agent::AgentSettings;
use crate::critic::{builtin_examples, load_examples, CriticExample, CriticSettings};
use crate::model::{Cassette, CassetteMode, HttpBackend, HttpConfig, ModelBackend, ModelClient, RetryPolicy, DEFAULT_FRAME_BUDGET};
use crate::prompts::Prompts;
use crate::toolkit::{ModuleSpec, Profile, ToolRegistry};
use crate::tools::{builtin_registry, ModelTools, PromptTool, ToolBackend, ToolSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// The built-in rule-based policy; needs no network.
    #[default]
    Policy,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub backend: ModelKind,
    pub http: Option<HttpConfig>,
    /// Critic replies by task id for the policy backend.
    pub verdicts: Option<PathBuf>,
    pub frame_budget: usize,
    /// Model requests in flight at once; unbounded when absent.
    pub concurrency: Option<usize>,
    pub min_interval_ms: u64,
    pub retries: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backend: ModelKind::Policy,
            http: None,
            verdicts: None,
            frame_budget: DEFAULT_FRAME_BUDGET,
            concurrency: None,
            min_interval_ms: 0,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    #[default]
    Oracle,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsConfig {
    pub backend: ToolKind,
    pub settings: ToolSettings,
}

/// A prompt-backed tool declared in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomTool {
    #[serde(flatten)]
    pub spec: ModuleSpec,
    /// Template filled with the call's arguments, `{name}` style.
    pub prompt: String,
    /// Uniform frames from the call's segment to attach.
    #[serde(default)]
    pub frames: usize,
}

/// Everything a run needs, loadable from TOML. Relative paths resolve
/// against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: String,
    /// Extra profiles, usable by name next to the built-ins.
    pub profiles: Vec<Profile>,
    pub mode: Mode,
    /// Items evaluated at once.
    pub concurrency: usize,
    pub traces_dir: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
    /// A built-in example set name or a path to a JSON file.
    pub critic_examples: Option<String>,
    /// `record:PATH` or `replay:PATH`.
    pub cassette: Option<String>,
    pub model: ModelConfig,
    pub tools: ToolsConfig,
    pub agent: AgentSettings,
    pub critic: CriticSettings,
    pub custom_tools: Vec<CustomTool>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: "visual_mcq".into(),
            profiles: Vec::new(),
            mode: Mode::AgentCritic,
            concurrency: 4,
            traces_dir: None,
            prompt_dir: None,
            critic_examples: None,
            cassette: None,
            model: ModelConfig::default(),
            tools: ToolsConfig::default(),
            agent: AgentSettings::default(),
            critic: CriticSettings::default(),
            custom_tools: Vec::new(),
        }
    }
}

/// Splits a `record:PATH` or `replay:PATH` cassette argument.
pub fn parse_cassette_arg(arg: &str) -> Result<(CassetteMode, PathBuf), EvalError> {
    let bad = || EvalError::Config(format!("cassette must be record:PATH or replay:PATH, got '{arg}'"));
    let (mode, path) = arg.split_once(':').ok_or_else(bad)?;
    if path.is_empty() {
        return Err(bad());
    }
    let mode = match mode {
        "record" => CassetteMode::Record,
        "replay" => CassetteMode::Replay,
        _ => return Err(bad()),
    };
    Ok((mode, PathBuf::from(path)))
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut c: Self = toml::from_str(&text).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        rebase(base, &mut c.traces_dir);
        rebase(base, &mut c.prompt_dir);
        rebase(base, &mut c.model.verdicts);
        if let Some(ex) = &c.critic_examples {
            if builtin_examples(ex).is_err() && Path::new(ex).is_relative() {
                c.critic_examples = Some(base.join(ex).display().to_string());
            }
        }
        Ok(c)
    }

    pub fn resolve_profile(&self) -> Result<Profile, EvalError> {
        self.profiles
            .iter()
            .find(|p| p.name == self.profile)
            .cloned()
            .or_else(|| Profile::builtin(&self.profile))
            .ok_or_else(|| EvalError::Config(format!("unknown profile '{}'", self.profile)))
    }

    /// The config as recorded in reports: run-local paths removed.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.traces_dir = None;
        c.cassette = None;
        serde_json::to_value(c).expect("config serializes")
    }
}

/// A configured model client, tool registry, prompts and critic examples.
pub struct Pipeline {
    pub config: RunConfig,
    pub profile: Profile,
    pub client: Arc<ModelClient>,
    pub registry: ToolRegistry,
    pub prompts: Arc<Prompts>,
    pub examples: Vec<CriticExample>,
}

impl Pipeline {
    /// Builds the model backend the config names, with its cassette.
    pub fn from_config(config: RunConfig) -> Result<Self, EvalError> {
        let replaying = match &config.cassette {
            Some(arg) => parse_cassette_arg(arg)?.0 == CassetteMode::Replay,
            None => false,
        };
        // A replay never reaches the backend, so it needs neither credentials
        // nor the verdicts file.
        let backend: Arc<dyn ModelBackend> = match config.model.backend {
            _ if replaying => Arc::new(PolicyModel::new()),
            ModelKind::Policy => Arc::new(match &config.model.verdicts {
                Some(p) => PolicyModel::load_verdicts(p)?,
                None => PolicyModel::new(),
            }),
            ModelKind::Http => {
                let http = config
                    .model
                    .http
                    .clone()
                    .ok_or_else(|| EvalError::Config("model.backend = \"http\" needs a [model.http] table".into()))?;
                Arc::new(HttpBackend::new(http))
            }
        };
        Self::with_backend(config, backend)
    }

    pub fn with_backend(config: RunConfig, backend: Arc<dyn ModelBackend>) -> Result<Self, EvalError> {
        let profile = config.resolve_profile()?;
        let mut client = ModelClient::new(backend)
            .with_frame_budget(config.model.frame_budget)
            .with_retry(RetryPolicy {
                attempts: config.model.retries.max(1),
                ..RetryPolicy::default()
            });
        if let Some(n) = config.model.concurrency {
            client = client.with_concurrency(n);
        }
        if config.model.min_interval_ms > 0 {
            client = client.with_min_interval(Duration::from_millis(config.model.min_interval_ms));
        }
        if let Some(arg) = &config.cassette {
            let (mode, path) = parse_cassette_arg(arg)?;
            let cassette = match mode {
                CassetteMode::Replay => Cassette::load_replay(&path)?,
                _ => Cassette::recorder(Some(path)),
            };
            let cassette = Arc::new(cassette);
            client = match mode {
                CassetteMode::Replay => ModelClient::replay_only(cassette)
                    .with_frame_budget(config.model.frame_budget),
                _ => client.with_cassette(cassette),
            };
        }
        let client = Arc::new(client);
        let prompts = Arc::new(match &config.prompt_dir {
            Some(dir) => Prompts::load_dir(dir).map_err(|e| EvalError::Io {
                path: dir.clone(),
                message: e.to_string(),
            })?,
            None => Prompts::default(),
        });
        let model_tools = ModelTools {
            client: client.clone(),
            prompts: prompts.clone(),
            settings: config.tools.settings.clone(),
        };
        let backend = match config.tools.backend {
            ToolKind::Oracle => ToolBackend::Oracle,
            ToolKind::Model => ToolBackend::Model(model_tools.clone()),
        };
        let mut registry = builtin_registry(&backend)?;
        for t in &config.custom_tools {
            let tool = PromptTool {
                tools: model_tools.clone(),
                template: t.prompt.clone(),
                frames: t.frames,
            };
            registry.register_tool(t.spec.clone(), Arc::new(tool))?;
        }
        let key = config.critic_examples.clone().unwrap_or_else(|| profile.examples.clone());
        let examples = match builtin_examples(&key) {
            Ok(e) => e,
            Err(_) if Path::new(&key).exists() => load_examples(&key)?,
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            config,
            profile,
            client,
            registry,
            prompts,
            examples,
        })
    }
}
