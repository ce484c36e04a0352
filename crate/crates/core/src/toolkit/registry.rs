use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::profile::StrategySubset;
use super::spec::{api_preamble, builtin_spec, ModuleSpec, ParamType, BUILTIN_ORDER};
use super::ConfigError;
use crate::domain::{TaskQuery, VideoSegment};
use crate::dsl::{CallArgs, ToolCallError, ToolHost, ToolReturn, Value};
use crate::fixtures::Video;

/// Arguments after binding to a signature. Optional parameters that were
/// not passed are bound to `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolArgs(BTreeMap<String, Value>);

impl ToolArgs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> &Value {
        self.0.get(name).unwrap_or(&Value::None)
    }

    pub fn str(&self, name: &str) -> Result<&str, String> {
        match self.get(name) {
            Value::Str(s) => Ok(s),
            other => Err(format!("argument '{name}' must be str, got {}", other.type_name())),
        }
    }

    pub fn opt_segment(&self, name: &str) -> Option<VideoSegment> {
        match self.get(name) {
            Value::Segment(s) => Some(*s),
            _ => None,
        }
    }

    pub fn opt_str_list(&self, name: &str) -> Option<Vec<String>> {
        match self.get(name) {
            Value::List(items) => Some(
                items
                    .iter()
                    .map(|v| match v {
                        Value::Str(s) => s.clone(),
                        other => crate::dsl::render_value(other),
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }
}

/// What a tool invocation can see about its episode.
pub struct EpisodeContext {
    pub task: Arc<TaskQuery>,
    pub video: Arc<Video>,
    /// True when the tool is applied directly to the whole task.
    pub direct: bool,
    /// Prefix for model request tags, e.g. `task/A/turn3`.
    pub tag: String,
    calls: AtomicUsize,
}

impl EpisodeContext {
    pub fn new(task: Arc<TaskQuery>, video: Arc<Video>, direct: bool, tag: impl Into<String>) -> Self {
        Self {
            task,
            video,
            direct,
            tag: tag.into(),
            calls: AtomicUsize::new(0),
        }
    }

    /// Unique tag for the next tool call in this step.
    pub fn next_call_tag(&self, tool: &str) -> String {
        let n = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        format!("{}/call{n}/{tool}", self.tag)
    }
}

pub struct ToolCall<'a> {
    pub ctx: &'a EpisodeContext,
    /// Tag prefix for model requests made by this call.
    pub tag: String,
}

pub trait Tool: Send + Sync {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String>;
}

impl<F> Tool for F
where
    F: Fn(&ToolArgs, &ToolCall<'_>) -> Result<ToolReturn, String> + Send + Sync,
{
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        self(args, call)
    }
}

/// Specs and backends for every known tool. Cheap to clone.
#[derive(Clone, Default)]
pub struct ToolRegistry {
    specs: Vec<ModuleSpec>,
    backends: HashMap<String, Arc<dyn Tool>>,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_tool(&mut self, spec: ModuleSpec, backend: Arc<dyn Tool>) -> Result<(), ConfigError> {
        if !valid_identifier(&spec.name) {
            return Err(ConfigError::InvalidName(spec.name));
        }
        if self.spec(&spec.name).is_some() {
            return Err(ConfigError::DuplicateTool(spec.name));
        }
        if spec.doc.trim().is_empty() {
            return Err(ConfigError::EmptyDoc(spec.name));
        }
        let mut seen = BTreeSet::new();
        for p in &spec.params {
            if !valid_identifier(&p.name) || !seen.insert(p.name.clone()) {
                return Err(ConfigError::InvalidName(format!("{}.{}", spec.name, p.name)));
            }
        }
        if let Some(reserved) = builtin_spec(&spec.name) {
            if reserved.params != spec.params || reserved.doc != spec.doc {
                return Err(ConfigError::ReservedMismatch(spec.name));
            }
        }
        self.backends.insert(spec.name.clone(), backend);
        self.specs.push(spec);
        Ok(())
    }

    /// Registers a built-in by name with the given backend.
    pub fn register_builtin(&mut self, name: &str, backend: Arc<dyn Tool>) -> Result<(), ConfigError> {
        let spec = builtin_spec(name).ok_or_else(|| ConfigError::UnknownModule(name.to_string()))?;
        self.register_tool(spec, backend)
    }

    pub fn spec(&self, name: &str) -> Option<&ModuleSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn specs(&self) -> &[ModuleSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    /// Checks a subset before any episode runs with it.
    pub fn validate_subset(&self, subset: &StrategySubset) -> Result<(), ConfigError> {
        if subset.modules.is_empty() {
            return Err(ConfigError::EmptySubset(subset.label));
        }
        for m in subset.active_modules() {
            if self.spec(&m).is_none() {
                return Err(ConfigError::UnknownModule(m));
            }
            if !self.backends.contains_key(&m) {
                return Err(ConfigError::MissingBackend(m));
            }
        }
        if subset.direct {
            let capable = subset
                .modules
                .iter()
                .filter(|m| self.spec(m).is_some_and(ModuleSpec::answer_capable))
                .count();
            if subset.modules.len() != 1 || capable != 1 {
                return Err(ConfigError::BadDirectSubset(subset.label));
            }
        }
        Ok(())
    }

    /// Function headers and docstrings for the subset's tools. Built-ins
    /// appear in listing order, byte for byte; custom tools follow in
    /// registration order.
    pub fn render_api(&self, subset: &StrategySubset) -> Result<String, ConfigError> {
        self.validate_subset(subset)?;
        let active: BTreeSet<String> = subset.active_modules().into_iter().collect();
        let mut out = api_preamble().to_string();
        for name in BUILTIN_ORDER {
            if active.contains(*name) {
                out.push_str(&self.spec(name).expect("validated").render());
            }
        }
        for spec in self.specs.iter().filter(|s| !s.is_builtin() && active.contains(&s.name)) {
            if !out.ends_with("\n\n") {
                out.push('\n');
            }
            out.push_str(&spec.render());
        }
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        out.push('\n');
        Ok(out)
    }

    /// Binds the registry to one episode with the subset's tools active.
    pub fn activate<'a>(&'a self, subset: &StrategySubset, ctx: EpisodeContext) -> Result<ActiveTools<'a>, ConfigError> {
        self.validate_subset(subset)?;
        Ok(ActiveTools {
            registry: self,
            active: subset.active_modules().into_iter().collect(),
            ctx,
        })
    }

    /// Calls one tool outside any program, as the direct strategy does.
    pub fn call_direct(&self, name: &str, args: ToolArgs, ctx: &EpisodeContext) -> Result<ToolReturn, String> {
        let backend = self
            .backends
            .get(name)
            .ok_or_else(|| format!("unknown tool '{name}'"))?;
        let call = ToolCall {
            ctx,
            tag: ctx.next_call_tag(name),
        };
        backend.call(&args, &call)
    }
}

pub struct ActiveTools<'a> {
    registry: &'a ToolRegistry,
    active: BTreeSet<String>,
    ctx: EpisodeContext,
}

impl ActiveTools<'_> {
    pub fn context(&self) -> &EpisodeContext {
        &self.ctx
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.ctx = EpisodeContext::new(
            self.ctx.task.clone(),
            self.ctx.video.clone(),
            self.ctx.direct,
            tag,
        );
    }
}

/// Matches call arguments to a signature, Python style.
pub fn bind_args(spec: &ModuleSpec, args: CallArgs) -> Result<ToolArgs, String> {
    let name = &spec.name;
    if args.positional.len() > spec.params.len() {
        return Err(format!(
            "{name}() takes {} arguments but {} were given",
            spec.params.len(),
            args.positional.len()
        ));
    }
    let mut bound: BTreeMap<String, Value> = BTreeMap::new();
    for (p, v) in spec.params.iter().zip(args.positional) {
        bound.insert(p.name.clone(), v);
    }
    for (k, v) in args.keyword {
        if !spec.params.iter().any(|p| p.name == k) {
            return Err(format!("{name}() got an unexpected keyword argument '{k}'"));
        }
        if bound.insert(k.clone(), v).is_some() {
            return Err(format!("{name}() got multiple values for argument '{k}'"));
        }
    }
    for p in &spec.params {
        let v = bound.entry(p.name.clone()).or_insert(Value::None);
        let ok = match (p.ty, &*v) {
            (_, Value::None) => p.optional,
            (ParamType::Any, _) => true,
            (ParamType::Str, Value::Str(_)) => true,
            (ParamType::Int, Value::Int(_)) => true,
            (ParamType::Segment, Value::Segment(_)) => true,
            (ParamType::StrList, Value::List(items)) => items.iter().all(|i| matches!(i, Value::Str(_))),
            _ => false,
        };
        if !ok {
            if matches!(v, Value::None) {
                return Err(format!("{name}() missing required argument '{}'", p.name));
            }
            return Err(format!(
                "{name}() argument '{}' must be {}, got {}",
                p.name,
                match p.ty {
                    ParamType::Str => "str",
                    ParamType::StrList => "a list of str",
                    ParamType::Segment => "a VideoSegment",
                    ParamType::Int => "int",
                    ParamType::Any => "any value",
                },
                v.type_name()
            ));
        }
    }
    Ok(ToolArgs(bound))
}

impl ToolHost for ActiveTools<'_> {
    fn invoke(&self, name: &str, args: CallArgs) -> Result<ToolReturn, ToolCallError> {
        let spec = self
            .registry
            .spec(name)
            .ok_or_else(|| ToolCallError::Unknown(name.to_string()))?;
        if !self.active.contains(name) {
            return Err(ToolCallError::NotActive(name.to_string()));
        }
        let bound = bind_args(spec, args).map_err(ToolCallError::Failed)?;
        let backend = &self.registry.backends[name];
        let call = ToolCall {
            ctx: &self.ctx,
            tag: self.ctx.next_call_tag(name),
        };
        backend
            .call(&bound, &call)
            .map_err(|e| ToolCallError::Failed(format!("{name}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolkit::spec::{module_api_listing, ParamSpec};
    use crate::toolkit::StrategyLabel;

    fn echo() -> Arc<dyn Tool> {
        Arc::new(|args: &ToolArgs, _: &ToolCall<'_>| {
            Ok(ToolReturn::value(args.iter().next().map(|(_, v)| v.clone()).unwrap_or(Value::None)))
        })
    }

    fn full_registry() -> ToolRegistry {
        let mut r = ToolRegistry::new();
        for name in BUILTIN_ORDER {
            r.register_builtin(name, echo()).unwrap();
        }
        r
    }

    fn subset(modules: &[&str], direct: bool) -> StrategySubset {
        StrategySubset {
            label: StrategyLabel('A'),
            modules: modules.iter().map(|s| s.to_string()).collect(),
            direct,
        }
    }

    #[test]
    fn full_subset_renders_listing_exactly() {
        let r = full_registry();
        let all = subset(&["get_segment", "find_when", "asr_understanding", "retrieval_qa"], false);
        assert_eq!(r.render_api(&all).unwrap(), module_api_listing());
    }

    #[test]
    fn partial_subset_excludes_other_docs() {
        let r = full_registry();
        let text = r.render_api(&subset(&["get_segment", "retrieval_qa"], false)).unwrap();
        assert!(text.contains("Clips the segment of the input video"));
        assert!(text.contains("Print final answer and exit."));
        assert!(!text.contains("Tool to determine timing of a query"));
        assert!(text.ends_with("  \"\"\"\n"));
    }

    #[test]
    fn empty_and_unknown_subsets_fail() {
        let r = full_registry();
        assert!(matches!(r.render_api(&subset(&[], false)), Err(ConfigError::EmptySubset(_))));
        assert!(matches!(
            r.render_api(&subset(&["nope"], false)),
            Err(ConfigError::UnknownModule(_))
        ));
        assert!(matches!(
            r.validate_subset(&subset(&["get_segment"], true)),
            Err(ConfigError::BadDirectSubset(_))
        ));
        assert!(r.validate_subset(&subset(&["find_when"], true)).is_ok());
    }

    #[test]
    fn registration_rules() {
        let mut r = full_registry();
        let custom = ModuleSpec {
            name: "count_objects".into(),
            params: vec![ParamSpec::required("label", ParamType::Str)],
            returns: "str".into(),
            doc: "Counts objects matching a label.".into(),
            answer_kinds: vec![],
            api_block: None,
        };
        r.register_tool(custom.clone(), echo()).unwrap();
        assert!(matches!(r.register_tool(custom.clone(), echo()), Err(ConfigError::DuplicateTool(_))));
        assert!(matches!(r.register_builtin("think", echo()), Err(ConfigError::DuplicateTool(_))));
        let mut fresh = ToolRegistry::new();
        let mut fake_think = custom.clone();
        fake_think.name = "think".into();
        assert!(matches!(
            fresh.register_tool(fake_think, echo()),
            Err(ConfigError::ReservedMismatch(_))
        ));
        let mut no_doc = custom.clone();
        no_doc.name = "other".into();
        no_doc.doc = "  ".into();
        assert!(matches!(fresh.register_tool(no_doc, echo()), Err(ConfigError::EmptyDoc(_))));
        let mut bad = custom;
        bad.name = "2x".into();
        assert!(matches!(fresh.register_tool(bad, echo()), Err(ConfigError::InvalidName(_))));

        let text = r.render_api(&subset(&["get_segment", "count_objects"], false)).unwrap();
        assert!(text.contains("def count_objects(label: str) -> str:"));
    }

    #[test]
    fn binding() {
        let spec = builtin_spec("retrieval_qa").unwrap();
        let args = CallArgs {
            positional: vec![Value::Str("q".into())],
            keyword: vec![("video_segment".into(), Value::Segment(VideoSegment::from_secs(0, 5).unwrap()))],
        };
        let b = bind_args(&spec, args).unwrap();
        assert_eq!(b.str("question").unwrap(), "q");
        assert_eq!(b.get("answer_options"), &Value::None);
        let missing = bind_args(&spec, CallArgs::default()).unwrap_err();
        assert_eq!(missing, "retrieval_qa() missing required argument 'question'");
        let dup = CallArgs {
            positional: vec![Value::Str("q".into())],
            keyword: vec![("question".into(), Value::Str("r".into()))],
        };
        assert!(bind_args(&spec, dup).unwrap_err().contains("multiple values"));
        let wrong = CallArgs {
            positional: vec![Value::Int(3)],
            keyword: vec![],
        };
        assert!(bind_args(&spec, wrong).unwrap_err().contains("must be str"));
        let extra = CallArgs {
            positional: vec![Value::None; 4],
            keyword: vec![],
        };
        assert!(bind_args(&spec, extra).unwrap_err().contains("takes 3 arguments"));
    }
}
