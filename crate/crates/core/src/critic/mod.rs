//! Runs the strategy episodes, asks the critic to compare them, and picks
//! the answer of a winning trace.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::agent::{task_block, Agent, Trace, TraceStep};
use crate::domain::{FinalAnswer, TaskQuery};
use crate::fixtures::Video;
use crate::model::{ModelClient, ModelError, ModelRequest};
use crate::prompts::Prompts;
use crate::toolkit::{ConfigError, StrategyLabel, StrategySubset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticExample {
    pub input_block: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<String>,
    pub winners: Vec<StrategyLabel>,
}

#[derive(Debug, Error)]
pub enum CriticError {
    #[error("the critic needs at least two traces to compare, got {0}")]
    TooFewTraces(usize),
    #[error("no built-in critic examples named '{0}'")]
    UnknownExamples(String),
    #[error("cannot read critic examples {path}: {message}")]
    Examples { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

const BUILTIN_EXAMPLES: &[(&str, &str)] = &[
    ("lvbench", include_str!("../../data/critic/lvbench.json")),
    ("neptune", include_str!("../../data/critic/neptune.json")),
    ("rtl", include_str!("../../data/critic/rtl.json")),
    ("egoschema", include_str!("../../data/critic/egoschema.json")),
];

pub fn builtin_examples(key: &str) -> Result<Vec<CriticExample>, CriticError> {
    let text = BUILTIN_EXAMPLES
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, t)| *t)
        .ok_or_else(|| CriticError::UnknownExamples(key.to_string()))?;
    parse_examples(text, key)
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<CriticExample>, CriticError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|e| CriticError::Examples {
        path: p.display().to_string(),
        message: e.to_string(),
    })?;
    parse_examples(&text, &p.display().to_string())
}

fn parse_examples(text: &str, origin: &str) -> Result<Vec<CriticExample>, CriticError> {
    let err = |message: String| CriticError::Examples {
        path: origin.to_string(),
        message,
    };
    let examples: Vec<CriticExample> = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    for (i, e) in examples.iter().enumerate() {
        if e.winners.is_empty() {
            return Err(err(format!("example {i} has no winners")));
        }
        for w in &e.winners {
            if !e.input_block.contains(&format!("Strategy {w} (")) {
                return Err(err(format!("example {i} names winner {w} which it does not present")));
            }
        }
    }
    Ok(examples)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticSettings {
    /// Most in-context examples shown to the critic; smaller sets are shown whole.
    pub examples: usize,
    /// Tool outputs longer than this many lines lose their middle.
    pub elide_lines: usize,
    /// Ask once more when the winners disagree, before keeping the first.
    pub reprompt_on_conflict: bool,
}

impl Default for CriticSettings {
    fn default() -> Self {
        Self {
            examples: 4,
            elide_lines: 60,
            reprompt_on_conflict: false,
        }
    }
}

/// Keeps the first and last lines of an over-long text.
pub fn elide(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if max_lines == 0 || lines.len() <= max_lines {
        return text.to_string();
    }
    let head = max_lines.div_ceil(2);
    let tail = max_lines / 2;
    let dropped = lines.len() - head - tail;
    let mut out: Vec<String> = lines[..head].iter().map(|s| s.to_string()).collect();
    out.push(format!("[... {dropped} lines elided ...]"));
    out.extend(lines[lines.len() - tail..].iter().map(|s| s.to_string()));
    out.join("\n")
}

pub fn render_example(e: &CriticExample) -> String {
    let mut out = format!("Input:\n{}\n\n", e.input_block.trim_end());
    if let Some(c) = &e.critique {
        out.push_str(&format!("Critique:\n{}\n\n", c.trim_end()));
    }
    let winners: Vec<String> = e.winners.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("Winning Strategies:\n{}\n\n", winners.join(", ")));
    out
}

/// A strategy heading followed by its steps as the agent saw them.
pub fn render_trace(trace: &Trace, elide_lines: usize) -> String {
    let mut out = format!("{}:\n", trace.subset().heading());
    for s in &trace.steps {
        let step = TraceStep {
            result: elide(&s.result, elide_lines),
            ..s.clone()
        };
        out.push_str(&match &step.program {
            Some(p) => format!("```\n{p}\n```\n{}\n\n", step.result),
            None => format!("{}\n\n", step.result),
        });
    }
    if let Some(f) = &trace.forced_response {
        out.push_str(&format!("{}\n\n", elide(f, elide_lines)));
    }
    out
}

/// Preamble, examples, then the live task ending at `Critique:`.
pub fn build_critique_prompt(
    task: &TaskQuery,
    traces: &[Trace],
    examples: &[CriticExample],
    settings: &CriticSettings,
    prompts: &Prompts,
) -> Result<ModelRequest, CriticError> {
    if traces.len() < 2 {
        return Err(CriticError::TooFewTraces(traces.len()));
    }
    let shown = settings.examples.min(examples.len());
    if shown < settings.examples {
        debug!(wanted = settings.examples, available = examples.len(), "example set smaller than the configured count");
    }
    let mut text = prompts.get("critic_preamble").trim_end().to_string();
    text.push_str("\n\n");
    for e in &examples[..shown] {
        text.push_str(&render_example(e));
    }
    text.push_str(&format!("Input:\n{}\n\n", task_block(task)));
    for t in traces {
        text.push_str(&render_trace(t, settings.elide_lines));
    }
    text.push_str("Critique:\n");
    Ok(ModelRequest::text(format!("{}/critic", task.id), text))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub critique: String,
    pub winners: Vec<StrategyLabel>,
    pub fallback_used: bool,
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)winning\s+strateg(?:y|ies)\s*:").unwrap())
}

/// Reads the winners after the last `Winning Strategies:` (or singular)
/// marker, keeping only presented labels.
pub fn parse_verdict(response: &str, presented: &[StrategyLabel]) -> CriticVerdict {
    let Some(m) = marker().find_iter(response).last() else {
        return CriticVerdict {
            critique: response.trim().to_string(),
            winners: Vec::new(),
            fallback_used: false,
        };
    };
    let before = response[..m.start()].trim();
    let critique = before
        .strip_prefix("Critique:")
        .unwrap_or(before)
        .trim()
        .to_string();
    let after = response[m.end()..].trim_start();
    let list = after.split("\n\n").next().unwrap_or_default();
    let mut winners = BTreeSet::new();
    for token in list.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim_matches(|c: char| !c.is_ascii_alphanumeric());
        let mut chars = token.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            let label = StrategyLabel(c);
            if presented.contains(&label) {
                winners.insert(label);
            }
        }
    }
    CriticVerdict {
        critique,
        winners: winners.into_iter().collect(),
        fallback_used: false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub answer: FinalAnswer,
    pub label: StrategyLabel,
    pub fallback_used: bool,
    /// The critic named winners whose answers disagree.
    pub conflict: bool,
}

/// Majority answer over parsed finals, ties to the earliest label. With no
/// parsed answer at all, the first trace.
pub fn majority(traces: &[Trace]) -> (FinalAnswer, StrategyLabel) {
    let mut best: Option<(usize, &Trace)> = None;
    for t in traces {
        if t.answer().is_unparsed() {
            continue;
        }
        let n = traces.iter().filter(|o| o.answer() == t.answer()).count();
        if best.map_or(true, |(b, _)| n > b) {
            best = Some((n, t));
        }
    }
    let t = best.map(|(_, t)| t).unwrap_or(&traces[0]);
    (t.answer().clone(), t.strategy_label)
}

fn winners_conflict(traces: &[Trace], verdict: &CriticVerdict) -> bool {
    let answers: Vec<&FinalAnswer> = traces
        .iter()
        .filter(|t| verdict.winners.contains(&t.strategy_label))
        .map(|t| t.answer())
        .collect();
    answers.windows(2).any(|w| w[0] != w[1])
}

/// Picks the answer of a winning trace, or falls back to a majority vote
/// when the verdict named no presented strategy.
pub fn select_answer(traces: &[Trace], verdict: &CriticVerdict) -> Selection {
    let mut ordered: Vec<&Trace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.strategy_label);
    let first_winner = ordered.iter().find(|t| verdict.winners.contains(&t.strategy_label));
    match first_winner {
        Some(t) => {
            let conflict = winners_conflict(traces, verdict);
            if conflict {
                warn!(winners = ?verdict.winners, "critic picked winners with conflicting answers; keeping the first");
            }
            Selection {
                answer: t.answer().clone(),
                label: t.strategy_label,
                fallback_used: false,
                conflict,
            }
        }
        None => {
            let sorted: Vec<Trace> = ordered.into_iter().cloned().collect();
            let (answer, label) = majority(&sorted);
            Selection {
                answer,
                label,
                fallback_used: true,
                conflict: false,
            }
        }
    }
}

/// Every strategy for one task, concurrently, in label order.
pub fn sample_strategies(
    agent: &Agent<'_>,
    task: &TaskQuery,
    video: &Arc<Video>,
    subsets: &[StrategySubset],
) -> Result<Vec<Trace>, ConfigError> {
    for s in subsets {
        agent.registry.validate_subset(s)?;
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = subsets
            .iter()
            .map(|s| scope.spawn(move || agent.run_strategy(task, video, s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("strategy episode panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub verdict: CriticVerdict,
    pub selection: Selection,
    /// Raw critic replies, one per prompt.
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Critic<'a> {
    pub client: &'a ModelClient,
    pub prompts: &'a Prompts,
    pub examples: Vec<CriticExample>,
    pub settings: CriticSettings,
}

impl Critic<'_> {
    /// Critiques the traces and selects an answer. A failed critic call
    /// degrades to the majority fallback rather than an error.
    pub fn judge(&self, task: &TaskQuery, traces: &[Trace]) -> Result<Judgement, CriticError> {
        let req = build_critique_prompt(task, traces, &self.examples, &self.settings, self.prompts)?;
        let presented: Vec<StrategyLabel> = traces.iter().map(|t| t.strategy_label).collect();
        let mut responses = Vec::new();
        let mut error = None;
        let mut verdict = match self.client.complete(&req) {
            Ok(r) => {
                let v = parse_verdict(&r, &presented);
                responses.push(r);
                v
            }
            Err(e) => {
                error = Some(describe(&e));
                CriticVerdict {
                    critique: String::new(),
                    winners: Vec::new(),
                    fallback_used: false,
                }
            }
        };
        if self.settings.reprompt_on_conflict && winners_conflict(traces, &verdict) {
            let text = format!(
                "{}{}\n\nThe strategies you picked have conflicting final answers, which is not allowed. Produce the critique again, then \"Winning Strategies:\" followed only by strategies that share one final answer.\n\nCritique:\n",
                req.text_content(),
                responses.last().map(String::as_str).unwrap_or_default().trim_end()
            );
            match self.client.complete(&ModelRequest::text(format!("{}/critic2", task.id), text)) {
                Ok(r) => {
                    let again = parse_verdict(&r, &presented);
                    responses.push(r);
                    if !again.winners.is_empty() {
                        verdict = again;
                    }
                }
                Err(e) => error = Some(describe(&e)),
            }
        }
        let selection = select_answer(traces, &verdict);
        verdict.fallback_used = selection.fallback_used;
        Ok(Judgement {
            verdict,
            selection,
            responses,
            error,
        })
    }
}

fn describe(e: &ModelError) -> String {
    format!("critic call failed: {e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<StrategyLabel> {
        s.chars().map(StrategyLabel).collect()
    }

    #[test]
    fn verdict_forms() {
        let abc = labels("ABC");
        let v = parse_verdict("Critique:\nA is right.\n\nWinning Strategies:\nA, C", &abc);
        assert_eq!(v.winners, labels("AC"));
        assert_eq!(v.critique, "A is right.");
        assert_eq!(parse_verdict("Winning Strategy:\nB", &abc).winners, labels("B"));
        assert_eq!(parse_verdict("Winning Strategies: B, C ", &abc).winners, labels("BC"));
        assert_eq!(parse_verdict("Winning Strategies:\nA and D", &abc).winners, labels("A"));
        assert!(parse_verdict("no marker", &abc).winners.is_empty());
        assert!(parse_verdict("Winning Strategies: none", &abc).winners.is_empty());
        let v = parse_verdict("Winning Strategies: A\nWinning Strategies:\n**B**", &abc);
        assert_eq!(v.winners, labels("B"));
    }

    #[test]
    fn elision_keeps_ends() {
        let text: String = (0..100).map(|i| format!("line {i}\n")).collect();
        let out = elide(&text, 10);
        assert!(out.starts_with("line 0\n"));
        assert!(out.contains("[... 90 lines elided ...]"));
        assert!(out.ends_with("line 99"));
        assert_eq!(elide("short", 10), "short");
    }

    #[test]
    fn builtin_example_sets_load() {
        assert_eq!(builtin_examples("lvbench").unwrap().len(), 3);
        for k in ["neptune", "rtl", "egoschema"] {
            assert_eq!(builtin_examples(k).unwrap().len(), 4);
        }
        assert!(builtin_examples("nope").is_err());
    }
}
