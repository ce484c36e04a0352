use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::iou::interval_union_iou;
use super::segment::VideoSegment;
use super::task::TaskKind;
use super::timestamp::parse_timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FinalAnswer {
    /// 1-based option index.
    Choice(u32),
    Ranges(Vec<VideoSegment>),
    Unparsed(String),
}

impl FinalAnswer {
    pub fn is_unparsed(&self) -> bool {
        matches!(self, FinalAnswer::Unparsed(_))
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            FinalAnswer::Choice(_) => "choice",
            FinalAnswer::Ranges(_) => "ranges",
            FinalAnswer::Unparsed(_) => "unparsed",
        }
    }

    /// Human readable form used in prompts and CLI output.
    pub fn render(&self) -> String {
        match self {
            FinalAnswer::Choice(i) => format!("({i})"),
            FinalAnswer::Ranges(r) => r
                .iter()
                .map(|s| format!("[{}, {}]", s.start(), s.end()))
                .collect::<Vec<_>>()
                .join(", "),
            FinalAnswer::Unparsed(t) => t.clone(),
        }
    }
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)final\s+answer\s*:").unwrap())
}

fn choice_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)final\s+answer\s*:\s*\(?\s*(\d+)\s*\)?").unwrap())
}

fn range_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"\[\s*['"]?(\d+:\d{2}(?::\d{2})?)['"]?\s*,\s*['"]?(\d+:\d{2}(?::\d{2})?)['"]?\s*\]"#,
        )
        .unwrap()
    })
}

/// Extracts the answer a trace committed to. Never fails: anything that
/// does not match comes back as `Unparsed` holding the original text.
pub fn parse_final_answer(text: &str, kind: TaskKind) -> FinalAnswer {
    let parsed = match kind {
        TaskKind::MultipleChoice => choice_pattern()
            .captures_iter(text)
            .filter_map(|c| c[1].parse::<u32>().ok())
            .filter(|i| *i >= 1)
            .last()
            .map(FinalAnswer::Choice),
        TaskKind::TemporalRange => marker().find_iter(text).last().and_then(|m| {
            let ranges: Vec<VideoSegment> = range_pattern()
                .captures_iter(&text[m.end()..])
                .filter_map(|c| {
                    let start = parse_timestamp(&c[1]).ok()?;
                    let end = parse_timestamp(&c[2]).ok()?;
                    VideoSegment::new(start, end).ok()
                })
                .collect();
            (!ranges.is_empty()).then_some(FinalAnswer::Ranges(ranges))
        }),
    };
    parsed.unwrap_or_else(|| FinalAnswer::Unparsed(text.to_string()))
}

/// Per-item score: 1/0 accuracy for choices, union IOU for ranges. Anything
/// unparsed or of the wrong shape scores zero.
pub fn score(predicted: &FinalAnswer, truth: &FinalAnswer) -> f64 {
    match (predicted, truth) {
        (FinalAnswer::Choice(p), FinalAnswer::Choice(t)) => {
            if p == t {
                1.0
            } else {
                0.0
            }
        }
        (FinalAnswer::Ranges(p), FinalAnswer::Ranges(t)) => interval_union_iou(p, t),
        _ => 0.0,
    }
}
