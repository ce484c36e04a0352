//! Fixture-backed tools. Each is a pure function of the fixture and the
//! arguments, which is what makes end-to-end runs checkable.

use super::text::{content_tokens, option_in, range_line};
use super::{NOT_VISIBLE, NO_RANGES, NO_SPEECH};
use crate::domain::{Timestamp, VideoSegment};
use crate::dsl::{ToolReturn, Value};
use crate::fixtures::VideoFixture;
use crate::toolkit::{Tool, ToolArgs, ToolCall};

fn fixture<'a>(call: &'a ToolCall<'_>) -> Result<&'a VideoFixture, String> {
    call.ctx
        .video
        .fixture()
        .ok_or_else(|| "oracle tools need an annotated fixture video".to_string())
}

fn target(args: &ToolArgs, call: &ToolCall<'_>) -> VideoSegment {
    args.opt_segment("video_segment")
        .unwrap_or_else(|| call.ctx.video.full_segment())
}

/// Events whose label shares a content token with the query, in time order.
pub fn find_when_oracle(fx: &VideoFixture, query: &str, segment: &VideoSegment) -> Vec<(VideoSegment, String)> {
    let q = content_tokens(query);
    let mut hits: Vec<(VideoSegment, String)> = fx
        .events
        .iter()
        .filter(|e| e.segment.intersects(segment))
        .filter(|e| !content_tokens(&e.label).is_disjoint(&q))
        .map(|e| (e.segment, e.justification.clone()))
        .collect();
    hits.sort_by_key(|(s, _)| (s.start(), s.end()));
    hits
}

pub struct OracleFindWhen;

impl Tool for OracleFindWhen {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let query = args.str("query")?;
        if query.trim().is_empty() {
            return Err("query must not be empty".into());
        }
        let hits = find_when_oracle(fixture(call)?, query, &target(args, call));
        let mut text = if hits.is_empty() {
            NO_RANGES.to_string()
        } else {
            hits.iter()
                .map(|(s, j)| range_line(s, j))
                .collect::<Vec<_>>()
                .join("\n")
        };
        if call.ctx.direct && !hits.is_empty() {
            let ranges: Vec<String> = hits
                .iter()
                .map(|(s, _)| format!("[{}, {}]", s.start(), s.end()))
                .collect();
            text.push_str(&format!("\nFinal Answer: {}", ranges.join(", ")));
        }
        Ok(ToolReturn::value(Value::Str(text)))
    }
}

/// First fact, in fixture order, whose keywords all occur in the question
/// and whose evidence the segment touches.
pub fn retrieval_oracle<'a>(fx: &'a VideoFixture, question: &str, segment: &VideoSegment) -> Option<&'a str> {
    let q = question.to_lowercase();
    fx.qa_facts
        .iter()
        .find(|f| {
            f.evidence.intersects(segment) && f.keywords.iter().all(|k| q.contains(&k.to_lowercase()))
        })
        .map(|f| f.answer.as_str())
}

pub struct OracleRetrievalQa;

impl Tool for OracleRetrievalQa {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let question = args.str("question")?;
        if question.trim().is_empty() {
            return Err("question must not be empty".into());
        }
        let Some(answer) = retrieval_oracle(fixture(call)?, question, &target(args, call)) else {
            return Ok(ToolReturn::value(Value::Str(NOT_VISIBLE.to_string())));
        };
        let mut text = answer.to_string();
        if let Some(options) = args.opt_str_list("answer_options") {
            if let Some(i) = option_in(answer, &options) {
                text.push_str(&format!("\nFinal Answer: ({i})"));
            }
        }
        Ok(ToolReturn::value(Value::Str(text)))
    }
}

pub struct OracleAsr;

impl Tool for OracleAsr {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let question = args.str("question")?;
        let fx = fixture(call)?;
        if fx.asr.is_empty() {
            return Ok(ToolReturn::value(Value::Str(NO_SPEECH.to_string())));
        }
        let point = |t: Timestamp| VideoSegment::new(t, t).expect("point");
        let q = question.to_lowercase();
        let fact = fx.qa_facts.iter().find(|f| {
            f.keywords.iter().all(|k| q.contains(&k.to_lowercase()))
                && fx.asr.iter().any(|l| f.evidence.intersects(&point(l.t)))
        });
        if let Some(f) = fact {
            return Ok(ToolReturn::value(Value::Str(f.answer.clone())));
        }
        let tokens = content_tokens(question);
        let lines: Vec<String> = fx
            .asr
            .iter()
            .filter(|l| !content_tokens(&l.text).is_disjoint(&tokens))
            .map(|l| format!("[{}] {}", l.t, l.text))
            .collect();
        let text = if lines.is_empty() {
            super::NO_SPEECH_MATCH.to_string()
        } else {
            lines.join("\n")
        };
        Ok(ToolReturn::value(Value::Str(text)))
    }
}
