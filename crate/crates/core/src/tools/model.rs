//! Tools powered by the multimodal model: windowed prompting over frames
//! and chunked prompting over the transcript.

use std::sync::{Arc, OnceLock};

use regex::Regex;

use super::text::render_options;
use super::{ToolSettings, NO_RANGES, NO_SPEECH};
use crate::domain::VideoSegment;
use crate::dsl::{ToolReturn, Value};
use crate::fixtures::{FrameWindow, SamplePolicy, Video};
use crate::model::{ModelClient, ModelError, ModelRequest, PromptPart};
use crate::prompts::Prompts;
use crate::toolkit::{Tool, ToolArgs, ToolCall};

#[derive(Clone)]
pub struct ModelTools {
    pub client: Arc<ModelClient>,
    pub prompts: Arc<Prompts>,
    pub settings: ToolSettings,
}

fn target(args: &ToolArgs, call: &ToolCall<'_>) -> VideoSegment {
    args.opt_segment("video_segment")
        .unwrap_or_else(|| call.ctx.video.full_segment())
}

fn failure(tool: &str, e: &ModelError) -> ToolReturn {
    ToolReturn {
        value: Value::Str(format!("{tool} failed: {e}")),
        finish: None,
        notes: vec![format!("model error: {e}")],
    }
}

impl ModelTools {
    /// One request per window, issued up to `window_parallelism` at a time,
    /// results in window order.
    fn per_window<T, F>(&self, windows: &[FrameWindow], f: F) -> Vec<Result<T, ModelError>>
    where
        T: Send,
        F: Fn(usize, &FrameWindow) -> Result<T, ModelError> + Sync,
    {
        let par = self.settings.window_parallelism.max(1);
        if par == 1 || windows.len() < 2 {
            return windows.iter().enumerate().map(|(i, w)| f(i, w)).collect();
        }
        let mut out = Vec::with_capacity(windows.len());
        let indexed: Vec<(usize, &FrameWindow)> = windows.iter().enumerate().collect();
        for chunk in indexed.chunks(par) {
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|(i, w)| s.spawn(|| f(*i, w))).collect();
                handles.into_iter().map(|h| h.join().expect("window worker panicked")).collect()
            });
            out.extend(results);
        }
        out
    }

    fn frames(video: &Video, w: &FrameWindow) -> PromptPart {
        PromptPart::Frames(w.indices.clone().map(|i| video.frame_ref(i)).collect())
    }
}

fn range_line_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^\s*\[\s*"?\d+:\d{2}(:\d{2})?"?\s*,\s*"?\d+:\d{2}(:\d{2})?"?\s*\]"#).unwrap())
}

/// Range lines from one window's response; chatter is dropped.
pub fn finding_lines(response: &str) -> Vec<String> {
    response
        .lines()
        .filter(|l| range_line_pattern().is_match(l))
        .map(|l| l.trim().to_string())
        .collect()
}

pub struct ModelFindWhen(pub ModelTools);

impl Tool for ModelFindWhen {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let query = args.str("query")?;
        if query.trim().is_empty() {
            return Err("query must not be empty".into());
        }
        let t = &self.0;
        let video = &call.ctx.video;
        let seg = target(args, call);
        let windows = video.windows(&seg, t.settings.find_when_window, t.settings.window_stride);
        let results = t.per_window(&windows, |i, w| {
            let text = t.prompts.fill(
                "find_when_window",
                &[
                    ("count", &w.len().to_string()),
                    ("start", &w.segment.start().to_string()),
                    ("end", &w.segment.end().to_string()),
                    ("query", query),
                ],
            );
            let req = ModelRequest::new(
                format!("{}/w{}", call.tag, i + 1),
                vec![PromptPart::Text(text), ModelTools::frames(video, w)],
            );
            t.client.complete(&req)
        });
        let mut lines = Vec::new();
        for r in results {
            match r {
                Ok(resp) => lines.extend(finding_lines(&resp)),
                Err(e) => return Ok(failure("find_when", &e)),
            }
        }
        let findings = if lines.is_empty() {
            NO_RANGES.to_string()
        } else {
            lines.join("\n")
        };
        if !call.ctx.direct {
            return Ok(ToolReturn::value(Value::Str(findings)));
        }
        let text = t.prompts.fill(
            "find_when_direct",
            &[
                ("query", &call.ctx.task.question),
                ("length", &video.duration().to_string()),
                ("findings", &findings),
            ],
        );
        match t.client.complete(&ModelRequest::text(format!("{}/answer", call.tag), text)) {
            Ok(resp) => Ok(ToolReturn::value(Value::Str(resp))),
            Err(e) => Ok(failure("find_when", &e)),
        }
    }
}

/// Frame indices named in a relevance response, one integer per line.
/// Lines that are not a bare integer are skipped.
pub fn parse_indices(response: &str) -> Vec<u64> {
    response
        .lines()
        .filter_map(|l| l.trim().trim_end_matches(['.', ',']).parse::<u64>().ok())
        .collect()
}

/// `k` evenly spread picks from `pool`, first and last included.
fn spread(pool: &[u64], k: usize) -> Vec<u64> {
    if pool.len() <= k {
        return pool.to_vec();
    }
    if k == 1 {
        return vec![pool[0]];
    }
    let n = pool.len();
    let mut out: Vec<u64> = (0..k).map(|i| pool[i * (n - 1) / (k - 1)]).collect();
    out.dedup();
    out
}

pub struct ModelRetrievalQa(pub ModelTools);

impl ModelRetrievalQa {
    /// Frames outside the target segment, sampled uniformly.
    pub fn context_indices(video: &Video, seg: &VideoSegment, k: usize) -> Vec<u64> {
        let inside = video.frame_range(seg);
        let rest: Vec<u64> = (0..video.frame_count()).filter(|i| !inside.contains(i)).collect();
        spread(&rest, k)
    }
}

impl Tool for ModelRetrievalQa {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let question = args.str("question")?;
        if question.trim().is_empty() {
            return Err("question must not be empty".into());
        }
        let t = &self.0;
        let s = &t.settings;
        let video = &call.ctx.video;
        let seg = target(args, call);
        let options = args.opt_str_list("answer_options");
        let options_text = match &options {
            Some(o) if !o.is_empty() => format!("Options:\n{}", render_options(Some(o))),
            _ => String::new(),
        };
        let windows = video.windows(&seg, s.retrieval_window, s.window_stride);
        let results = t.per_window(&windows, |i, w| {
            let indices: Vec<String> = w.indices.clone().map(|x| x.to_string()).collect();
            let text = t.prompts.fill(
                "retrieval_select",
                &[
                    ("count", &w.len().to_string()),
                    ("start", &w.segment.start().to_string()),
                    ("end", &w.segment.end().to_string()),
                    ("indices", &indices.join(", ")),
                    ("question", question),
                    ("options", &options_text),
                ],
            );
            let req = ModelRequest::new(
                format!("{}/select{}", call.tag, i + 1),
                vec![PromptPart::Text(text), ModelTools::frames(video, w)],
            );
            t.client.complete(&req).map(|resp| {
                parse_indices(&resp)
                    .into_iter()
                    .filter(|x| w.indices.contains(x))
                    .collect::<Vec<u64>>()
            })
        });
        let mut retrieved = Vec::new();
        for r in results {
            match r {
                Ok(list) => retrieved.extend(list),
                Err(e) => return Ok(failure("retrieval_qa", &e)),
            }
        }
        retrieved.sort_unstable();
        retrieved.dedup();
        retrieved.truncate(s.retrieved_cap);
        let mut notes = Vec::new();
        if retrieved.is_empty() {
            retrieved = video.sample_indices(&seg, SamplePolicy::Uniform(s.retrieved_cap));
            notes.push(format!(
                "no frames reported relevant; using {} uniform frames from the segment",
                retrieved.len()
            ));
        }
        let context = Self::context_indices(video, &seg, s.context_frames);
        let guidance = if call.ctx.direct {
            "Write out your reasoning step by step, then end your response with \"Final Answer: (X)\" where X is the number of the correct option."
        } else {
            "Answer the question based on the frames. If options are given, say which option is best supported and why."
        };
        let text = t.prompts.fill(
            "retrieval_answer",
            &[
                ("length", &video.duration().to_string()),
                ("retrieved", &retrieved.len().to_string()),
                ("context", &context.len().to_string()),
                ("question", question),
                ("options", &options_text),
                ("guidance", guidance),
            ],
        );
        let mut parts = vec![
            PromptPart::Text(text),
            PromptPart::Frames(retrieved.iter().map(|&i| video.frame_ref(i)).collect()),
        ];
        if !context.is_empty() {
            parts.push(PromptPart::Frames(context.iter().map(|&i| video.frame_ref(i)).collect()));
        }
        match t.client.complete(&ModelRequest::new(format!("{}/answer", call.tag), parts)) {
            Ok(resp) => Ok(ToolReturn {
                value: Value::Str(resp),
                finish: None,
                notes,
            }),
            Err(e) => Ok(failure("retrieval_qa", &e)),
        }
    }
}

pub struct ModelAsr(pub ModelTools);

/// Splits transcript lines into chunks of at most `max_chars` characters.
/// A single over-long line gets a chunk of its own.
pub fn chunk_lines(lines: &[String], max_chars: usize) -> Vec<String> {
    let mut chunks: Vec<String> = Vec::new();
    let mut cur = String::new();
    for l in lines {
        if !cur.is_empty() && cur.len() + l.len() + 1 > max_chars {
            chunks.push(std::mem::take(&mut cur));
        }
        cur.push_str(l);
        cur.push('\n');
    }
    if !cur.is_empty() {
        chunks.push(cur);
    }
    chunks
}

impl Tool for ModelAsr {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let question = args.str("question")?;
        let t = &self.0;
        let asr = call.ctx.video.asr();
        if asr.is_empty() {
            return Ok(ToolReturn::value(Value::Str(NO_SPEECH.to_string())));
        }
        let options = args.opt_str_list("answer_options");
        let options_text = match &options {
            Some(o) if !o.is_empty() => format!("Options:\n{}", render_options(Some(o))),
            _ => String::new(),
        };
        let lines: Vec<String> = asr.iter().map(|l| format!("[{}] {}", l.t, l.text)).collect();
        let chunks = chunk_lines(&lines, t.settings.asr_chunk_chars);
        let parts = chunks.len().to_string();
        let mut findings = Vec::new();
        for (i, chunk) in chunks.iter().enumerate() {
            let text = t.prompts.fill(
                "asr_chunk",
                &[
                    ("part", &(i + 1).to_string()),
                    ("parts", &parts),
                    ("transcript", chunk.trim_end()),
                    ("question", question),
                    ("options", &options_text),
                ],
            );
            match t.client.complete(&ModelRequest::text(format!("{}/part{}", call.tag, i + 1), text)) {
                Ok(r) => findings.push(r),
                Err(e) => return Ok(failure("asr_understanding", &e)),
            }
        }
        if findings.len() == 1 {
            return Ok(ToolReturn::value(Value::Str(findings.remove(0))));
        }
        let joined: Vec<String> = findings
            .iter()
            .enumerate()
            .map(|(i, f)| format!("Part {}:\n{}", i + 1, f.trim_end()))
            .collect();
        let text = t.prompts.fill(
            "asr_consolidate",
            &[
                ("parts", &parts),
                ("findings", &joined.join("\n\n")),
                ("question", question),
                ("options", &options_text),
            ],
        );
        match t.client.complete(&ModelRequest::text(format!("{}/consolidate", call.tag), text)) {
            Ok(r) => Ok(ToolReturn::value(Value::Str(r))),
            Err(e) => Ok(failure("asr_understanding", &e)),
        }
    }
}

/// A custom tool backed by one model call: `{param}` placeholders in the
/// template are filled with the rendered arguments, and a `video_segment`
/// argument (or the whole video) contributes uniformly sampled frames.
pub struct PromptTool {
    pub tools: ModelTools,
    pub template: String,
    pub frames: usize,
}

impl Tool for PromptTool {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let rendered: Vec<(String, String)> = args
            .iter()
            .map(|(k, v)| (k.clone(), crate::dsl::render_value(v)))
            .collect();
        let vars: Vec<(&str, &str)> = rendered.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let text = crate::prompts::fill_template(&self.template, &vars);
        let mut parts = vec![PromptPart::Text(text)];
        if self.frames > 0 {
            let seg = target(args, call);
            parts.push(PromptPart::Frames(
                call.ctx.video.sample_frames(&seg, SamplePolicy::Uniform(self.frames)),
            ));
        }
        match self.tools.client.complete(&ModelRequest::new(call.tag.clone(), parts)) {
            Ok(r) => Ok(ToolReturn::value(Value::Str(r))),
            Err(e) => Ok(failure("tool", &e)),
        }
    }
}
