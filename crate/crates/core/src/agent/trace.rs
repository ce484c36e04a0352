use serde::{Deserialize, Serialize};

use crate::domain::FinalAnswer;
use crate::dsl::CallRecord;
use crate::toolkit::{StrategyLabel, StrategySubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Finished,
    BudgetExhausted,
    ForcedAnswer,
    /// The model or a direct tool call failed outright.
    Failed,
}

/// One turn: the program the model wrote (if any) and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Fenced program text; `None` for turns answered in prose.
    pub program: Option<String>,
    /// Rendered result, or the prose itself for program-free turns.
    pub result: String,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calls: Vec<TraceCall>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCall {
    pub tool: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<CallRecord> for TraceCall {
    fn from(c: CallRecord) -> Self {
        Self {
            tool: c.tool,
            output: c.output,
            error: c.error,
            notes: c.notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFinal {
    #[serde(flatten)]
    pub answer: FinalAnswer,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub task_id: String,
    pub strategy_label: StrategyLabel,
    pub modules: Vec<String>,
    #[serde(default)]
    pub direct: bool,
    pub steps: Vec<TraceStep>,
    #[serde(rename = "final")]
    pub final_answer: TraceFinal,
    pub stop_reason: StopReason,
    pub step_budget: usize,
    /// Text of the forced-answer turn, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_response: Option<String>,
    /// Self-evaluation scores, one per candidate answer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub confidences: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trace {
    pub(crate) fn start(task_id: &str, subset: &StrategySubset, step_budget: usize) -> Self {
        Self {
            task_id: task_id.to_string(),
            strategy_label: subset.label,
            modules: subset.modules.clone(),
            direct: subset.direct,
            steps: Vec::new(),
            final_answer: TraceFinal {
                answer: FinalAnswer::Unparsed(String::new()),
                raw: String::new(),
            },
            stop_reason: StopReason::Failed,
            step_budget,
            forced_response: None,
            confidences: Vec::new(),
            error: None,
        }
    }

    pub fn answer(&self) -> &FinalAnswer {
        &self.final_answer.answer
    }

    pub fn subset(&self) -> StrategySubset {
        StrategySubset {
            label: self.strategy_label,
            modules: self.modules.clone(),
            direct: self.direct,
        }
    }

    /// The steps as the agent saw them: fenced programs followed by their
    /// results, prose turns verbatim.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&step_text(s));
        }
        if let Some(f) = &self.forced_response {
            out.push_str(f);
            out.push_str("\n\n");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

pub(crate) fn step_text(s: &TraceStep) -> String {
    match &s.program {
        Some(p) => format!("```\n{p}\n```\n{}\n\n", s.result),
        None => format!("{}\n\n", s.result),
    }
}
