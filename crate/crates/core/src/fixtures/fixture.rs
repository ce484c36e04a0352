use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FrameRate, Timestamp, VideoSegment};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCaption {
    pub t: Timestamp,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub segment: VideoSegment,
    pub label: String,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrLine {
    pub t: Timestamp,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaFact {
    pub evidence: VideoSegment,
    pub keywords: Vec<String>,
    pub answer: String,
}

/// A synthetic annotated timeline that stands in for a real video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFixture {
    pub duration: Timestamp,
    pub fps: FrameRate,
    pub frames: Vec<FrameCaption>,
    pub events: Vec<Event>,
    pub asr: Vec<AsrLine>,
    pub qa_facts: Vec<QaFact>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    duration: Timestamp,
    #[serde(default)]
    fps: FrameRate,
    #[serde(default)]
    frames: Vec<FrameCaption>,
    #[serde(default)]
    events: Vec<RawEvent>,
    #[serde(default)]
    asr: Vec<AsrLine>,
    #[serde(default)]
    qa_facts: Vec<RawFact>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    start: Timestamp,
    end: Timestamp,
    label: String,
    #[serde(default)]
    justification: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFact {
    start: Timestamp,
    end: Timestamp,
    keywords: Vec<String>,
    answer: String,
}

fn invalid(field: String, message: impl Into<String>) -> FixtureError {
    FixtureError::Invalid {
        field,
        message: message.into(),
    }
}

fn span(field: &str, start: Timestamp, end: Timestamp, duration: Timestamp) -> Result<VideoSegment, FixtureError> {
    let seg = VideoSegment::new(start, end).map_err(|e| invalid(field.to_string(), e.to_string()))?;
    seg.check_within(duration)
        .map_err(|e| invalid(field.to_string(), e.to_string()))?;
    Ok(seg)
}

impl VideoFixture {
    /// A bare fixture with one caption per second and no annotations.
    pub fn blank(duration: Timestamp) -> Self {
        Self {
            duration,
            fps: FrameRate::ONE,
            frames: Vec::new(),
            events: Vec::new(),
            asr: Vec::new(),
            qa_facts: Vec::new(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, FixtureError> {
        Self::parse(text, Path::new("<memory>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self, FixtureError> {
        let raw: RawFixture = serde_json::from_str(text).map_err(|e| FixtureError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let duration = raw.duration;
        let mut events = Vec::with_capacity(raw.events.len());
        for (i, e) in raw.events.into_iter().enumerate() {
            events.push(Event {
                segment: span(&format!("events[{i}]"), e.start, e.end, duration)?,
                label: e.label,
                justification: e.justification,
            });
        }
        let mut qa_facts = Vec::with_capacity(raw.qa_facts.len());
        for (i, f) in raw.qa_facts.into_iter().enumerate() {
            qa_facts.push(QaFact {
                evidence: span(&format!("qa_facts[{i}]"), f.start, f.end, duration)?,
                keywords: f.keywords,
                answer: f.answer,
            });
        }
        let fixture = Self {
            duration,
            fps: raw.fps,
            frames: raw.frames,
            events,
            asr: raw.asr,
            qa_facts,
        };
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if self.duration.secs() == 0 {
            return Err(invalid("duration".into(), "must be positive"));
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(invalid(
                    format!("frames[{}].t", i + 1),
                    format!("{} is not after {}; frames must be strictly increasing", w[1].t, w[0].t),
                ));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.t > self.duration {
                return Err(invalid(
                    format!("frames[{i}].t"),
                    format!("{} exceeds duration {}", f.t, self.duration),
                ));
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            e.segment
                .check_within(self.duration)
                .map_err(|err| invalid(format!("events[{i}]"), err.to_string()))?;
        }
        for (i, f) in self.qa_facts.iter().enumerate() {
            f.evidence
                .check_within(self.duration)
                .map_err(|err| invalid(format!("qa_facts[{i}]"), err.to_string()))?;
            if f.keywords.is_empty() {
                return Err(invalid(format!("qa_facts[{i}].keywords"), "must not be empty"));
            }
        }
        for (i, a) in self.asr.iter().enumerate() {
            if a.t > self.duration {
                return Err(invalid(
                    format!("asr[{i}].t"),
                    format!("{} exceeds duration {}", a.t, self.duration),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let raw = RawFixture {
            duration: self.duration,
            fps: self.fps,
            frames: self.frames.clone(),
            events: self
                .events
                .iter()
                .map(|e| RawEvent {
                    start: e.segment.start(),
                    end: e.segment.end(),
                    label: e.label.clone(),
                    justification: e.justification.clone(),
                })
                .collect(),
            asr: self.asr.clone(),
            qa_facts: self
                .qa_facts
                .iter()
                .map(|f| RawFact {
                    start: f.evidence.start(),
                    end: f.evidence.end(),
                    keywords: f.keywords.clone(),
                    answer: f.answer.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("fixture serializes")
    }
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<VideoFixture, FixtureError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    VideoFixture::parse(&text, path)
}
