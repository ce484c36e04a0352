use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::config::Pipeline;
use super::dataset::DatasetItem;
use super::{EvalError, Mode};
use crate::agent::{Agent, Trace};
use crate::critic::{majority, sample_strategies, Critic, Judgement};
use crate::domain::{score, FinalAnswer, TaskKind, TaskQuery};
use crate::fixtures::Video;
use crate::toolkit::{enumerate_fixed_subsets, strategy_subsets, ModuleSpec, StrategyLabel, StrategySubset, ASR_UNDERSTANDING};

/// Label carried by sweep reports: picking the best subset needs the
/// labels of the very items it is scored on.
pub const ORACLE_VALIDATION: &str = "oracle-validation";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticSummary {
    pub winners: Vec<StrategyLabel>,
    pub fallback_used: bool,
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub task_id: String,
    pub kind: TaskKind,
    pub answer: FinalAnswer,
    pub truth: FinalAnswer,
    /// Strategy whose answer was taken.
    pub strategy: Option<StrategyLabel>,
    /// 1/0 for choices, union IOU for ranges.
    pub score: f64,
    /// Trace files, relative to the traces directory.
    pub traces: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic: Option<CriticSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub items: usize,
    pub choice_items: usize,
    /// Fraction of choice items answered correctly.
    pub accuracy: Option<f64>,
    pub range_items: usize,
    /// Mean union IOU over range items.
    pub miou: Option<f64>,
    /// Mean item score over everything.
    pub mean_score: f64,
    pub failures: usize,
}

impl Aggregate {
    pub fn from_records(items: &[ItemRecord]) -> Self {
        let mean = |kind: TaskKind| {
            let scores: Vec<f64> = items.iter().filter(|i| i.kind == kind).map(|i| i.score).collect();
            let n = scores.len();
            (n, (n > 0).then(|| scores.iter().sum::<f64>() / n as f64))
        };
        let (choice_items, accuracy) = mean(TaskKind::MultipleChoice);
        let (range_items, miou) = mean(TaskKind::TemporalRange);
        Self {
            items: items.len(),
            choice_items,
            accuracy,
            range_items,
            miou,
            mean_score: if items.is_empty() {
                0.0
            } else {
                items.iter().map(|i| i.score).sum::<f64>() / items.len() as f64
            },
            failures: items.iter().filter(|i| i.error.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u64,
    pub item_ms: BTreeMap<String, u64>,
}

/// Where a run read and wrote, which differs between a run and its replay.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Runtime {
    pub dataset: Option<String>,
    pub traces_dir: Option<String>,
    pub cassette: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub profile: String,
    pub config: serde_json::Value,
    pub items: Vec<ItemRecord>,
    pub aggregate: Aggregate,
    pub timing: Timing,
    #[serde(default)]
    pub runtime: Runtime,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report without timing and run-local paths, which is what a
    /// replay must reproduce byte for byte.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        r.runtime = Runtime::default();
        r.to_json()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let io = |message: String| EvalError::Io {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        write_file(path.as_ref(), &self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub label: StrategyLabel,
    pub modules: Vec<String>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub validation: String,
    pub profile: String,
    pub pool: Vec<String>,
    pub subsets: Vec<SubsetScore>,
    pub best: StrategyLabel,
    pub best_score: f64,
}

impl AblationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// File-system safe form of a task id.
pub fn trace_file_name(task_id: &str) -> String {
    task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

/// What one task produced under one mode.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub traces: Vec<Trace>,
    pub judgement: Option<Judgement>,
    pub answer: FinalAnswer,
    pub strategy: Option<StrategyLabel>,
    pub error: Option<String>,
}

impl TaskOutcome {
    fn failed(msg: String) -> Self {
        Self {
            traces: Vec::new(),
            judgement: None,
            answer: FinalAnswer::Unparsed(msg.clone()),
            strategy: None,
            error: Some(msg),
        }
    }

    fn from_trace(trace: Trace) -> Self {
        Self {
            answer: trace.answer().clone(),
            strategy: Some(trace.strategy_label),
            error: trace.error.clone(),
            judgement: None,
            traces: vec![trace],
        }
    }
}

impl Pipeline {
    pub fn agent(&self) -> Agent<'_> {
        Agent::new(&self.client, &self.registry, &self.prompts).with_settings(self.config.agent.clone())
    }

    /// Every pool module the task allows, as one non-direct subset.
    pub fn full_subset(&self, task: &TaskQuery) -> StrategySubset {
        StrategySubset {
            label: StrategyLabel('A'),
            modules: self
                .profile
                .pool
                .iter()
                .filter(|m| task.allow_asr || m.as_str() != ASR_UNDERSTANDING)
                .cloned()
                .collect(),
            direct: false,
        }
    }

    /// Runs one task. Failures land in the outcome, never in a panic or an
    /// early return.
    pub fn run_task(&self, task: &TaskQuery, video: &Arc<Video>, mode: Mode, fixed: Option<&StrategySubset>) -> TaskOutcome {
        let agent = self.agent();
        let subset = fixed.cloned().unwrap_or_else(|| self.full_subset(task));
        let traced = |r: Result<Trace, crate::toolkit::ConfigError>| match r {
            Ok(t) => TaskOutcome::from_trace(t),
            Err(e) => TaskOutcome::failed(e.to_string()),
        };
        match mode {
            Mode::Agent => traced(agent.run_episode(task, video, &subset)),
            Mode::SingleProgram => traced(agent.run_single_program(task, video, &subset)),
            Mode::SelfEval => traced(agent.run_self_eval(task, video, &subset)),
            Mode::Direct => match strategy_subsets(task, &self.profile).into_iter().find(|s| s.direct) {
                Some(s) => traced(agent.run_direct(task, video, &s)),
                None => TaskOutcome::failed(format!("profile '{}' has no direct strategy", self.profile.name)),
            },
            Mode::AgentCritic => self.run_with_critic(&agent, task, video),
        }
    }

    fn run_with_critic(&self, agent: &Agent<'_>, task: &TaskQuery, video: &Arc<Video>) -> TaskOutcome {
        let subsets = strategy_subsets(task, &self.profile);
        let traces = match sample_strategies(agent, task, video, &subsets) {
            Ok(t) => t,
            Err(e) => return TaskOutcome::failed(e.to_string()),
        };
        let critic = Critic {
            client: &self.client,
            prompts: &self.prompts,
            examples: self.examples.clone(),
            settings: self.config.critic.clone(),
        };
        match critic.judge(task, &traces) {
            Ok(j) => TaskOutcome {
                answer: j.selection.answer.clone(),
                strategy: Some(j.selection.label),
                error: j.error.clone(),
                judgement: Some(j),
                traces,
            },
            Err(e) => {
                warn!(task = %task.id, "critic unavailable: {e}");
                let (answer, label) = majority(&traces);
                TaskOutcome {
                    answer,
                    strategy: Some(label),
                    error: Some(e.to_string()),
                    judgement: None,
                    traces,
                }
            }
        }
    }

    /// Writes the outcome's traces and critic judgement; returns the trace
    /// file names relative to the traces directory.
    pub fn persist(&self, subdir: &str, task_id: &str, outcome: &TaskOutcome) -> Result<Vec<String>, EvalError> {
        let dir = format!("{subdir}/{}", trace_file_name(task_id));
        let names: Vec<String> = outcome
            .traces
            .iter()
            .map(|t| format!("{dir}/{}.json", t.strategy_label))
            .collect();
        if let Some(root) = &self.config.traces_dir {
            for (t, name) in outcome.traces.iter().zip(&names) {
                write_file(&root.join(name), &t.to_json())?;
            }
            if let Some(j) = &outcome.judgement {
                let text = serde_json::to_string_pretty(j).expect("judgement serializes");
                write_file(&root.join(format!("{dir}/critic.json")), &text)?;
            }
        }
        Ok(names)
    }

    /// Scores `items` under `mode`, writing traces when a traces directory
    /// is configured.
    pub fn evaluate(&self, items: &[DatasetItem], mode: Mode) -> Result<RunReport, EvalError> {
        self.evaluate_with(items, mode, None, mode.as_str())
    }

    fn evaluate_with(
        &self,
        items: &[DatasetItem],
        mode: Mode,
        fixed: Option<&StrategySubset>,
        subdir: &str,
    ) -> Result<RunReport, EvalError> {
        if items.is_empty() {
            return Err(EvalError::EmptyDataset);
        }
        let start = Instant::now();
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<(ItemRecord, u64)>>> = Mutex::new(vec![None; items.len()]);
        let workers = self.config.concurrency.clamp(1, items.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(item) = items.get(i) else { break };
                    let t0 = Instant::now();
                    let outcome = self.run_task(&item.task, &item.video, mode, fixed);
                    let (traces, persist_error) = match self.persist(subdir, &item.task.id, &outcome) {
                        Ok(names) => (names, None),
                        Err(e) => (Vec::new(), Some(e.to_string())),
                    };
                    let record = ItemRecord {
                        task_id: item.task.id.clone(),
                        kind: item.task.kind,
                        score: score(&outcome.answer, &item.truth),
                        answer: outcome.answer,
                        truth: item.truth.clone(),
                        strategy: outcome.strategy,
                        traces,
                        critic: outcome.judgement.map(|j| CriticSummary {
                            winners: j.verdict.winners,
                            fallback_used: j.selection.fallback_used,
                            conflict: j.selection.conflict,
                        }),
                        error: outcome.error.or(persist_error),
                    };
                    let ms = t0.elapsed().as_millis() as u64;
                    slots.lock().unwrap()[i] = Some((record, ms));
                });
            }
        });
        let mut records = Vec::with_capacity(items.len());
        let mut item_ms = BTreeMap::new();
        for (record, ms) in slots.into_inner().unwrap().into_iter().flatten() {
            item_ms.insert(record.task_id.clone(), ms);
            records.push(record);
        }
        let aggregate = Aggregate::from_records(&records);
        info!(mode = %mode, items = aggregate.items, mean = aggregate.mean_score, "evaluation done");
        Ok(RunReport {
            mode,
            profile: self.profile.name.clone(),
            config: self.config.snapshot(),
            items: records,
            aggregate,
            timing: Timing {
                total_ms: start.elapsed().as_millis() as u64,
                item_ms,
            },
            runtime: Runtime {
                dataset: None,
                traces_dir: self.config.traces_dir.as_ref().map(|p| p.display().to_string()),
                cassette: self.config.cassette.clone(),
            },
        })
    }

    /// Agent mode under every fixed pool subset with an answer-capable
    /// module, and the best of them.
    pub fn ablate(&self, items: &[DatasetItem]) -> Result<AblationReport, EvalError> {
        if items.is_empty() {
            return Err(EvalError::EmptyDataset);
        }
        let capable = |m: &str| self.registry.spec(m).is_some_and(ModuleSpec::answer_capable);
        let mut subsets = Vec::new();
        for s in enumerate_fixed_subsets(&self.profile.pool, capable) {
            let report = self.evaluate_with(items, Mode::Agent, Some(&s), &format!("ablate/{}", s.label))?;
            subsets.push(SubsetScore {
                label: s.label,
                modules: s.modules,
                aggregate: report.aggregate,
            });
        }
        let best = subsets
            .iter()
            .fold(None::<&SubsetScore>, |best, s| match best {
                Some(b) if b.aggregate.mean_score >= s.aggregate.mean_score => Some(b),
                _ => Some(s),
            })
            .ok_or_else(|| EvalError::Config("the profile pool has no answer-capable module".into()))?;
        Ok(AblationReport {
            validation: ORACLE_VALIDATION.to_string(),
            profile: self.profile.name.clone(),
            pool: self.profile.pool.clone(),
            best: best.label,
            best_score: best.aggregate.mean_score,
            subsets,
        })
    }
}
