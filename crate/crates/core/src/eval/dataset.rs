use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value as Json;

use super::EvalError;
use crate::domain::{parse_timestamp, FinalAnswer, TaskKind, TaskQuery, Timestamp, VideoSegment};
use crate::fixtures::Video;
use crate::toolkit::Profile;

/// A task with its ground truth and the loaded video.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub task: TaskQuery,
    pub truth: FinalAnswer,
    pub video: Arc<Video>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    video: String,
    question: String,
    #[serde(default)]
    options: Option<Vec<String>>,
    answer: Json,
    #[serde(default)]
    allow_asr: bool,
}

fn time_of(v: &Json) -> Result<Timestamp, String> {
    match v {
        Json::Number(n) => n
            .as_f64()
            .and_then(Timestamp::from_secs_f64)
            .ok_or_else(|| format!("bad time {n}")),
        Json::String(s) => parse_timestamp(s).map_err(|e| e.to_string()),
        other => Err(format!("time must be seconds or MM:SS, got {other}")),
    }
}

fn parse_truth(answer: &Json, kind: TaskKind, options: usize) -> Result<FinalAnswer, String> {
    match kind {
        TaskKind::MultipleChoice => {
            let i = answer
                .as_u64()
                .ok_or_else(|| format!("multiple choice answer must be an option number, got {answer}"))?;
            if i == 0 || i as usize > options {
                return Err(format!("answer {i} is outside the {options} options"));
            }
            Ok(FinalAnswer::Choice(i as u32))
        }
        TaskKind::TemporalRange => {
            let pairs = answer
                .as_array()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| "range answer must be a non-empty list of [start, end] pairs".to_string())?;
            let mut out = Vec::with_capacity(pairs.len());
            for p in pairs {
                let pair = p
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| format!("range must be a [start, end] pair, got {p}"))?;
                let seg = VideoSegment::new(time_of(&pair[0])?, time_of(&pair[1])?).map_err(|e| e.to_string())?;
                out.push(seg);
            }
            Ok(FinalAnswer::Ranges(out))
        }
    }
}

/// Reads a JSON-lines dataset. Video paths resolve against the dataset's
/// directory and each video is loaded once. With a profile, every item must
/// be of the profile's task kind.
pub fn load_dataset(path: impl AsRef<Path>, profile: Option<&Profile>) -> Result<Vec<DatasetItem>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut videos: BTreeMap<PathBuf, Arc<Video>> = BTreeMap::new();
    let mut items = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Dataset {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let rec: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if items.iter().any(|i: &DatasetItem| i.task.id == rec.id) {
            return Err(err(format!("duplicate id '{}'", rec.id)));
        }
        let kind = if rec.options.is_some() {
            TaskKind::MultipleChoice
        } else {
            TaskKind::TemporalRange
        };
        if let Some(p) = profile {
            if p.kind != kind {
                return Err(err(format!("item is {kind:?} but profile '{}' expects {:?}", p.name, p.kind)));
            }
        }
        let video_path = base.join(&rec.video);
        let video = match videos.get(&video_path) {
            Some(v) => v.clone(),
            None => {
                let mut v = Video::open(&video_path).map_err(|e| err(e.to_string()))?;
                v.id = rec.video.clone();
                let v = Arc::new(v);
                videos.insert(video_path, v.clone());
                v
            }
        };
        let n_options = rec.options.as_ref().map_or(0, Vec::len);
        let task = match rec.options {
            Some(opts) => TaskQuery::multiple_choice(rec.id, rec.question, opts, video.video_ref(), rec.allow_asr),
            None => TaskQuery::temporal_range(rec.id, rec.question, video.video_ref(), rec.allow_asr),
        }
        .map_err(|e| err(e.to_string()))?;
        let truth = parse_truth(&rec.answer, kind, n_options).map_err(err)?;
        if let FinalAnswer::Ranges(r) = &truth {
            for s in r {
                s.check_within(video.duration()).map_err(|e| err(e.to_string()))?;
            }
        }
        items.push(DatasetItem { task, truth, video });
    }
    Ok(items)
}
