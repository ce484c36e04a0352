use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::segment::FrameRate;
use super::timestamp::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultipleChoice,
    TemporalRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum VideoSourceKind {
    FixturePath(PathBuf),
    FramesDirectory(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub source: VideoSourceKind,
    pub duration: Timestamp,
    pub fps: FrameRate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("multiple choice task `{0}` has no options")]
    MissingOptions(String),
    #[error("temporal range task `{0}` must not carry options")]
    UnexpectedOptions(String),
    #[error("video for task `{0}` has zero duration")]
    EmptyVideo(String),
    #[error("task `{0}` has an empty question")]
    EmptyQuestion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskQuery {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub kind: TaskKind,
    pub video: VideoRef,
    #[serde(default)]
    pub allow_asr: bool,
}

impl TaskQuery {
    pub fn multiple_choice(
        id: impl Into<String>,
        question: impl Into<String>,
        options: Vec<String>,
        video: VideoRef,
        allow_asr: bool,
    ) -> Result<Self, TaskError> {
        let task = Self {
            id: id.into(),
            question: question.into(),
            options: Some(options),
            kind: TaskKind::MultipleChoice,
            video,
            allow_asr,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn temporal_range(
        id: impl Into<String>,
        question: impl Into<String>,
        video: VideoRef,
        allow_asr: bool,
    ) -> Result<Self, TaskError> {
        let task = Self {
            id: id.into(),
            question: question.into(),
            options: None,
            kind: TaskKind::TemporalRange,
            video,
            allow_asr,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.question.trim().is_empty() {
            return Err(TaskError::EmptyQuestion(self.id.clone()));
        }
        if self.video.duration.secs() == 0 {
            return Err(TaskError::EmptyVideo(self.id.clone()));
        }
        match (self.kind, &self.options) {
            (TaskKind::MultipleChoice, None) => Err(TaskError::MissingOptions(self.id.clone())),
            (TaskKind::MultipleChoice, Some(o)) if o.is_empty() => {
                Err(TaskError::MissingOptions(self.id.clone()))
            }
            (TaskKind::TemporalRange, Some(_)) => {
                Err(TaskError::UnexpectedOptions(self.id.clone()))
            }
            _ => Ok(()),
        }
    }

    pub fn options(&self) -> &[String] {
        self.options.as_deref().unwrap_or(&[])
    }
}
