//! The reasoning loop: prompt, run the returned program, feed the result
//! back, until the agent finishes or runs out of steps. Also the direct,
//! single-program and self-evaluation variants.

mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracing::debug;

pub use trace::{StopReason, Trace, TraceCall, TraceFinal, TraceStep};

use crate::domain::{parse_final_answer, FinalAnswer, TaskKind, TaskQuery};
use crate::dsl::{execute_program, extract_code_block, parse_program, Environment, StepResult, Value};
use crate::fixtures::Video;
use crate::model::{ModelClient, ModelRequest};
use crate::prompts::Prompts;
use crate::toolkit::{ConfigError, EpisodeContext, StrategySubset, ToolArgs, ToolRegistry};
use crate::tools::render_options;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub step_budget: usize,
    /// Ask for an answer once the budget is spent.
    pub forced_answer: bool,
    /// Candidate answers the self-evaluation loop may produce.
    pub self_eval_rounds: usize,
}

impl Default for AgentSettings {
    fn default() -> Self {
        Self {
            step_budget: 10,
            forced_answer: true,
            self_eval_rounds: 5,
        }
    }
}

/// Question, numbered options and video length, as shown to the agent and
/// the critic.
pub fn task_block(task: &TaskQuery) -> String {
    let mut out = format!("Question: {}\n", task.question);
    if task.kind == TaskKind::MultipleChoice {
        out.push_str("Possible answer choices:\n");
        out.push_str(&render_options(task.options.as_deref()));
    }
    out.push_str(&format!("Video length: {}", task.video.duration));
    out
}

fn answer_format(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::MultipleChoice => "\"Final Answer: (X)\" where X is the number of your chosen option",
        TaskKind::TemporalRange => "\"Final Answer: [MM:SS, MM:SS]\", listing more than one range separated by commas if needed",
    }
}

/// Confidence from a self-evaluation reply: the first digit 1 to 3, else 1.
pub fn parse_confidence(text: &str) -> u8 {
    text.chars()
        .find(|c| c.is_ascii_digit())
        .and_then(|c| c.to_digit(10))
        .filter(|d| (1..=3).contains(d))
        .unwrap_or(1) as u8
}

pub struct Agent<'a> {
    pub client: &'a ModelClient,
    pub registry: &'a ToolRegistry,
    pub prompts: &'a Prompts,
    pub settings: AgentSettings,
}

/// What one turn of the loop produced.
enum Turn {
    Answered,
    Continue,
    Failed,
}

struct Episode<'e> {
    task: &'e TaskQuery,
    trace: Trace,
    prompt: String,
    env: Environment,
}

impl Episode<'_> {
    fn set_final(&mut self, answer: FinalAnswer, raw: String) {
        self.trace.final_answer = TraceFinal { answer, raw };
    }
}

impl<'a> Agent<'a> {
    pub fn new(client: &'a ModelClient, registry: &'a ToolRegistry, prompts: &'a Prompts) -> Self {
        Self {
            client,
            registry,
            prompts,
            settings: AgentSettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: AgentSettings) -> Self {
        self.settings = settings;
        self
    }

    /// Preamble, tool API and task statement.
    pub fn episode_prompt(&self, task: &TaskQuery, subset: &StrategySubset) -> Result<String, ConfigError> {
        let api = self.registry.render_api(subset)?;
        Ok(format!(
            "{}{}\n{}\n\n",
            self.prompts.get("agent_preamble"),
            api,
            task_block(task)
        ))
    }

    fn begin<'e>(&self, task: &'e TaskQuery, subset: &StrategySubset, budget: usize) -> Result<Episode<'e>, ConfigError> {
        if subset.direct {
            return Err(ConfigError::BadDirectSubset(subset.label));
        }
        Ok(Episode {
            task,
            trace: Trace::start(&task.id, subset, budget),
            prompt: self.episode_prompt(task, subset)?,
            env: Environment::new(),
        })
    }

    /// One generate-execute turn. Appends the step and its transcript text.
    fn turn(&self, ep: &mut Episode<'_>, video: &Arc<Video>, tag: &str) -> Turn {
        let response = match self.client.complete(&ModelRequest::text(tag, ep.prompt.clone())) {
            Ok(r) => r,
            Err(e) => {
                let msg = format!("model call failed: {e}");
                ep.set_final(FinalAnswer::Unparsed(msg.clone()), String::new());
                ep.trace.error = Some(msg);
                ep.trace.stop_reason = StopReason::Failed;
                return Turn::Failed;
            }
        };
        let kind = ep.task.kind;
        if let Some(code) = extract_code_block(&response) {
            let result = match parse_program(&code) {
                Err(pe) => StepResult::from_error(pe.to_string()),
                Ok(program) => {
                    let ctx = EpisodeContext::new(Arc::new(ep.task.clone()), video.clone(), false, tag);
                    let subset = ep.trace.subset();
                    match self.registry.activate(&subset, ctx) {
                        Ok(host) => execute_program(&program, &mut ep.env, &host),
                        Err(e) => StepResult::from_error(e.to_string()),
                    }
                }
            };
            let step = TraceStep {
                program: Some(code),
                result: result.rendered.clone(),
                terminal: result.terminal,
                error: result.error.clone(),
                calls: result.calls.into_iter().map(Into::into).collect(),
            };
            ep.prompt.push_str(&trace::step_text(&step));
            ep.trace.steps.push(step);
            if let Some(f) = result.finish {
                ep.set_final(f.answer, f.raw);
                return Turn::Answered;
            }
            return Turn::Continue;
        }
        let parsed = parse_final_answer(&response, kind);
        if !parsed.is_unparsed() {
            let step = TraceStep {
                program: None,
                result: response.clone(),
                terminal: true,
                error: None,
                calls: Vec::new(),
            };
            ep.prompt.push_str(&trace::step_text(&step));
            ep.trace.steps.push(step);
            ep.set_final(parsed, response);
            return Turn::Answered;
        }
        let step = TraceStep {
            program: None,
            result: response,
            terminal: false,
            error: Some("no code block or final answer".into()),
            calls: Vec::new(),
        };
        ep.prompt.push_str(&trace::step_text(&step));
        ep.prompt.push_str(self.prompts.get("corrective").trim_end());
        ep.prompt.push_str("\n\n");
        ep.trace.steps.push(step);
        Turn::Continue
    }

    /// Runs turns until an answer, a failure, or `budget` more steps.
    fn drive(&self, ep: &mut Episode<'_>, video: &Arc<Video>, prefix: &str, budget: usize) -> Turn {
        for _ in 0..budget {
            let n = ep.trace.steps.len() + 1;
            match self.turn(ep, video, &format!("{prefix}/turn{n}")) {
                Turn::Continue => continue,
                other => return other,
            }
        }
        Turn::Continue
    }

    fn force_answer(&self, ep: &mut Episode<'_>, tag: &str) {
        let text = format!(
            "{}{}",
            ep.prompt,
            self.prompts.fill("forced_answer", &[("format", answer_format(ep.task.kind))])
        );
        match self.client.complete(&ModelRequest::text(tag, text)) {
            Ok(r) => {
                let answer = parse_final_answer(&r, ep.task.kind);
                ep.prompt.push_str(&format!("{r}\n\n"));
                ep.trace.forced_response = Some(r.clone());
                ep.set_final(answer, r);
                ep.trace.stop_reason = StopReason::ForcedAnswer;
            }
            Err(e) => {
                let msg = format!("model call failed: {e}");
                ep.set_final(FinalAnswer::Unparsed(msg.clone()), String::new());
                ep.trace.error = Some(msg);
                ep.trace.stop_reason = StopReason::Failed;
            }
        }
    }

    /// The iterative agent under one non-direct strategy.
    pub fn run_episode(&self, task: &TaskQuery, video: &Arc<Video>, subset: &StrategySubset) -> Result<Trace, ConfigError> {
        let budget = self.settings.step_budget.max(1);
        let mut ep = self.begin(task, subset, budget)?;
        let prefix = format!("{}/{}", task.id, subset.label);
        match self.drive(&mut ep, video, &prefix, budget) {
            Turn::Answered => ep.trace.stop_reason = StopReason::Finished,
            Turn::Failed => {}
            Turn::Continue => {
                if self.settings.forced_answer {
                    self.force_answer(&mut ep, &format!("{prefix}/forced"));
                } else {
                    ep.trace.stop_reason = StopReason::BudgetExhausted;
                    ep.set_final(FinalAnswer::Unparsed("step budget exhausted".into()), String::new());
                }
            }
        }
        debug!(task = %task.id, label = %subset.label, steps = ep.trace.steps.len(), "episode done");
        Ok(ep.trace)
    }

    /// One call of a single answer-capable module over the whole video.
    pub fn run_direct(&self, task: &TaskQuery, video: &Arc<Video>, subset: &StrategySubset) -> Result<Trace, ConfigError> {
        if !subset.direct {
            return Err(ConfigError::BadDirectSubset(subset.label));
        }
        self.registry.validate_subset(subset)?;
        let module = &subset.modules[0];
        let spec = self.registry.spec(module).expect("validated");
        if !spec.can_answer(task.kind) {
            return Err(ConfigError::BadDirectSubset(subset.label));
        }
        let mut args = ToolArgs::new();
        for p in &spec.params {
            match p.name.as_str() {
                "question" | "query" => args = args.with(&p.name, Value::Str(task.question.clone())),
                "answer_options" => {
                    if let Some(opts) = &task.options {
                        args = args.with(
                            &p.name,
                            Value::List(opts.iter().cloned().map(Value::Str).collect()),
                        );
                    }
                }
                _ => {}
            }
        }
        let mut trace = Trace::start(&task.id, subset, 1);
        let ctx = EpisodeContext::new(
            Arc::new(task.clone()),
            video.clone(),
            true,
            format!("{}/{}/direct", task.id, subset.label),
        );
        match self.registry.call_direct(module, args, &ctx) {
            Ok(ret) => {
                let text = crate::dsl::render_value(&ret.value);
                let answer = parse_final_answer(&text, task.kind);
                trace.steps.push(TraceStep {
                    program: None,
                    result: text.clone(),
                    terminal: true,
                    error: None,
                    calls: vec![TraceCall {
                        tool: module.clone(),
                        output: text.clone(),
                        error: None,
                        notes: ret.notes,
                    }],
                });
                trace.final_answer = TraceFinal { answer, raw: text };
                trace.stop_reason = StopReason::Finished;
            }
            Err(e) => {
                let msg = format!("{module}: {e}");
                trace.steps.push(TraceStep {
                    program: None,
                    result: format!("error: {msg}"),
                    terminal: true,
                    error: Some(msg.clone()),
                    calls: Vec::new(),
                });
                trace.final_answer = TraceFinal {
                    answer: FinalAnswer::Unparsed(msg.clone()),
                    raw: String::new(),
                };
                trace.error = Some(msg);
            }
        }
        Ok(trace)
    }

    /// Runs whichever loop the subset calls for.
    pub fn run_strategy(&self, task: &TaskQuery, video: &Arc<Video>, subset: &StrategySubset) -> Result<Trace, ConfigError> {
        if subset.direct {
            self.run_direct(task, video, subset)
        } else {
            self.run_episode(task, video, subset)
        }
    }

    /// Baseline: the model writes one whole program up front, which runs
    /// once with no feedback.
    pub fn run_single_program(&self, task: &TaskQuery, video: &Arc<Video>, subset: &StrategySubset) -> Result<Trace, ConfigError> {
        let mut ep = self.begin(task, subset, 1)?;
        let tag = format!("{}/{}/single", task.id, subset.label);
        let prompt = format!("{}{}", ep.prompt, self.prompts.get("single_program"));
        let response = match self.client.complete(&ModelRequest::text(&tag, prompt)) {
            Ok(r) => r,
            Err(e) => {
                let msg = format!("model call failed: {e}");
                ep.set_final(FinalAnswer::Unparsed(msg.clone()), String::new());
                ep.trace.error = Some(msg);
                return Ok(ep.trace);
            }
        };
        let Some(code) = extract_code_block(&response) else {
            let answer = parse_final_answer(&response, task.kind);
            ep.trace.stop_reason = if answer.is_unparsed() { StopReason::Failed } else { StopReason::Finished };
            ep.trace.steps.push(TraceStep {
                program: None,
                result: response.clone(),
                terminal: true,
                error: None,
                calls: Vec::new(),
            });
            ep.set_final(answer, response);
            return Ok(ep.trace);
        };
        let result = match parse_program(&code) {
            Err(pe) => StepResult::from_error(pe.to_string()),
            Ok(program) => {
                let ctx = EpisodeContext::new(Arc::new(task.clone()), video.clone(), false, tag);
                let host = self.registry.activate(subset, ctx)?;
                execute_program(&program, &mut ep.env, &host)
            }
        };
        let (answer, raw) = match (&result.finish, &result.error) {
            (Some(f), _) => (f.answer.clone(), f.raw.clone()),
            (None, Some(err)) => (FinalAnswer::Unparsed(format!("error: {err}")), String::new()),
            (None, None) => (parse_final_answer(&result.rendered, task.kind), result.rendered.clone()),
        };
        ep.trace.stop_reason = if answer.is_unparsed() { StopReason::Failed } else { StopReason::Finished };
        ep.trace.error = result.error.clone();
        ep.trace.steps.push(TraceStep {
            program: Some(code),
            result: result.rendered,
            terminal: true,
            error: result.error,
            calls: result.calls.into_iter().map(Into::into).collect(),
        });
        ep.set_final(answer, raw);
        Ok(ep.trace)
    }

    /// Baseline: after each candidate answer the model rates its confidence
    /// from 1 to 3; a 3 or the round limit ends the episode.
    pub fn run_self_eval(&self, task: &TaskQuery, video: &Arc<Video>, subset: &StrategySubset) -> Result<Trace, ConfigError> {
        let rounds = self.settings.self_eval_rounds.max(1);
        let budget = self.settings.step_budget.max(1);
        let mut ep = self.begin(task, subset, budget * rounds)?;
        let prefix = format!("{}/{}/selfeval", task.id, subset.label);
        for round in 1..=rounds {
            match self.drive(&mut ep, video, &prefix, budget) {
                Turn::Failed => return Ok(ep.trace),
                Turn::Answered => ep.trace.stop_reason = StopReason::Finished,
                Turn::Continue => {
                    self.force_answer(&mut ep, &format!("{prefix}/forced{round}"));
                    if ep.trace.stop_reason == StopReason::Failed {
                        return Ok(ep.trace);
                    }
                }
            }
            let ask = self
                .prompts
                .fill("confidence", &[("answer", &ep.trace.final_answer.answer.render())]);
            let text = format!("{}{ask}", ep.prompt);
            let reply = match self.client.complete(&ModelRequest::text(format!("{prefix}/confidence{round}"), text)) {
                Ok(r) => r,
                Err(e) => {
                    ep.trace.error = Some(format!("model call failed: {e}"));
                    return Ok(ep.trace);
                }
            };
            let c = parse_confidence(&reply);
            ep.trace.confidences.push(c);
            if c == 3 {
                break;
            }
            ep.prompt.push_str(&format!(
                "{}\n{}\n\nYour confidence is {c}. Keep investigating with the tools before answering again.\n\n",
                ask.trim_end(),
                reply.trim_end()
            ));
        }
        Ok(ep.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_parsing() {
        assert_eq!(parse_confidence("3"), 3);
        assert_eq!(parse_confidence("I'd say 2."), 2);
        assert_eq!(parse_confidence("7"), 1);
        assert_eq!(parse_confidence("very"), 1);
    }
}
