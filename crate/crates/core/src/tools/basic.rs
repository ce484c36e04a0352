use crate::domain::{parse_final_answer, parse_timestamp, VideoSegment};
use crate::dsl::{ToolReturn, Value};
use crate::toolkit::{Tool, ToolArgs, ToolCall};

/// Echoes its thought; the point is the record in the trace.
pub struct Think;

impl Tool for Think {
    fn call(&self, args: &ToolArgs, _: &ToolCall<'_>) -> Result<ToolReturn, String> {
        Ok(ToolReturn::value(Value::Str(args.str("thought")?.to_string())))
    }
}

/// Trims the video. The range is clamped to the video; a request that
/// starts after the video ends, or ends before it starts, is an error.
pub struct GetSegment;

impl Tool for GetSegment {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let start = parse_timestamp(args.str("start")?).map_err(|e| e.to_string())?;
        let end = parse_timestamp(args.str("end")?).map_err(|e| e.to_string())?;
        let duration = call.ctx.video.duration();
        if start > end {
            return Err(format!("start {start} is after end {end}"));
        }
        if start > duration {
            return Err(format!("segment starts at {start}, after the video ends at {duration}"));
        }
        let seg = VideoSegment::new(start, end.min(duration)).map_err(|e| e.to_string())?;
        Ok(ToolReturn::value(Value::Segment(seg)))
    }
}

/// Ends the episode with the parsed answer.
pub struct Finish;

impl Tool for Finish {
    fn call(&self, args: &ToolArgs, call: &ToolCall<'_>) -> Result<ToolReturn, String> {
        let raw = match args.get("final_answer") {
            Value::Str(s) => s.clone(),
            other => crate::dsl::render_value(other),
        };
        let answer = parse_final_answer(&raw, call.ctx.task.kind);
        Ok(ToolReturn {
            value: Value::Str(raw),
            finish: Some(answer),
            notes: Vec::new(),
        })
    }
}
