use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fixture::{load_fixture, AsrLine, FixtureError, VideoFixture};
use crate::domain::{FrameRate, Timestamp, VideoRef, VideoSegment, VideoSourceKind};

/// An opaque pointer to one sampled frame. Pixels are only resolved by a
/// live transport.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRef {
    pub video: String,
    pub index: u64,
    pub t: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePolicy {
    Uniform(usize),
    All,
    Stride(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameWindow {
    pub indices: Range<u64>,
    pub segment: VideoSegment,
}

impl FrameWindow {
    pub fn len(&self) -> u64 {
        self.indices.end - self.indices.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A directory of frame images named by zero-padded index, with a
/// `metadata.json` sidecar holding `duration` and `fps`.
#[derive(Debug, Clone, PartialEq)]
pub struct FramesDirectory {
    pub root: PathBuf,
    pub duration: Timestamp,
    pub fps: FrameRate,
    pub files: Vec<PathBuf>,
}

#[derive(Deserialize)]
struct Sidecar {
    duration: Timestamp,
    fps: FrameRate,
}

pub const FRAMES_METADATA_FILE: &str = "metadata.json";

impl FramesDirectory {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let root = root.as_ref().to_path_buf();
        let meta_path = root.join(FRAMES_METADATA_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|source| FixtureError::Io {
            path: meta_path.clone(),
            source,
        })?;
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| FixtureError::Schema {
            path: meta_path.clone(),
            message: e.to_string(),
        })?;
        let entries = std::fs::read_dir(&root).map_err(|source| FixtureError::Io {
            path: root.clone(),
            source,
        })?;
        let mut files: Vec<(u64, PathBuf)> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| FixtureError::Io {
                path: root.clone(),
                source,
            })?;
            let path = entry.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if path.file_name().and_then(|n| n.to_str()) == Some(FRAMES_METADATA_FILE) {
                continue;
            }
            if let Ok(index) = stem.parse::<u64>() {
                files.push((index, path));
            }
        }
        files.sort();
        for (expected, (index, path)) in files.iter().enumerate() {
            if *index != expected as u64 {
                return Err(FixtureError::Invalid {
                    field: path.display().to_string(),
                    message: format!("expected frame index {expected}, found {index}"),
                });
            }
        }
        Ok(Self {
            root,
            duration: meta.duration,
            fps: meta.fps,
            files: files.into_iter().map(|(_, p)| p).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VideoData {
    Fixture(VideoFixture),
    Frames(FramesDirectory),
}

/// A video bound to an identifier, shared read-only across episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub data: VideoData,
}

impl Video {
    pub fn from_fixture(id: impl Into<String>, fixture: VideoFixture) -> Self {
        Self {
            id: id.into(),
            data: VideoData::Fixture(fixture),
        }
    }

    /// Loads either a fixture file or a frames directory.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let path = path.as_ref();
        let id = path.display().to_string();
        if path.is_dir() {
            Ok(Self {
                id,
                data: VideoData::Frames(FramesDirectory::open(path)?),
            })
        } else {
            Ok(Self::from_fixture(id, load_fixture(path)?))
        }
    }

    pub fn duration(&self) -> Timestamp {
        match &self.data {
            VideoData::Fixture(f) => f.duration,
            VideoData::Frames(d) => d.duration,
        }
    }

    pub fn fps(&self) -> FrameRate {
        match &self.data {
            VideoData::Fixture(f) => f.fps,
            VideoData::Frames(d) => d.fps,
        }
    }

    pub fn fixture(&self) -> Option<&VideoFixture> {
        match &self.data {
            VideoData::Fixture(f) => Some(f),
            VideoData::Frames(_) => None,
        }
    }

    pub fn asr(&self) -> &[AsrLine] {
        match &self.data {
            VideoData::Fixture(f) => &f.asr,
            VideoData::Frames(_) => &[],
        }
    }

    pub fn video_ref(&self) -> VideoRef {
        let source = match &self.data {
            VideoData::Fixture(_) => VideoSourceKind::FixturePath(PathBuf::from(&self.id)),
            VideoData::Frames(d) => VideoSourceKind::FramesDirectory(d.root.clone()),
        };
        VideoRef {
            source,
            duration: self.duration(),
            fps: self.fps(),
        }
    }

    pub fn full_segment(&self) -> VideoSegment {
        VideoSegment::full(self.duration())
    }

    /// Size of the sampled frame index space, `floor(duration * fps)`.
    pub fn frame_count(&self) -> u64 {
        self.fps().frames_in(self.duration()).max(1)
    }

    /// Half-open index range of frames whose time falls in `[start, end)`.
    /// A degenerate segment maps to the single frame at its start.
    pub fn frame_range(&self, segment: &VideoSegment) -> Range<u64> {
        let total = self.frame_count();
        let fps = self.fps();
        let a = fps.frame_at_or_after(segment.start()).min(total - 1);
        let b = fps.frame_at_or_after(segment.end()).min(total);
        if b <= a {
            a..a + 1
        } else {
            a..b
        }
    }

    pub fn frame_ref(&self, index: u64) -> FrameRef {
        let image = match &self.data {
            VideoData::Frames(d) => d.files.get(index as usize).cloned(),
            VideoData::Fixture(_) => None,
        };
        FrameRef {
            video: self.id.clone(),
            index,
            t: self.fps().timestamp_of(index),
            image,
        }
    }

    pub fn sample_frames(&self, segment: &VideoSegment, policy: SamplePolicy) -> Vec<FrameRef> {
        self.sample_indices(segment, policy)
            .into_iter()
            .map(|i| self.frame_ref(i))
            .collect()
    }

    pub fn sample_indices(&self, segment: &VideoSegment, policy: SamplePolicy) -> Vec<u64> {
        let range = self.frame_range(segment);
        match policy {
            SamplePolicy::All => range.collect(),
            SamplePolicy::Stride(s) => range.step_by(s.max(1)).collect(),
            SamplePolicy::Uniform(k) => uniform_indices(range, segment, self.fps(), k),
        }
    }

    /// Consecutive windows over the segment's frames. `stride` defaults to
    /// `size`, which gives a partition.
    pub fn windows(&self, segment: &VideoSegment, size: usize, stride: Option<usize>) -> Vec<FrameWindow> {
        let size = size.max(1) as u64;
        let stride = stride.unwrap_or(size as usize).max(1) as u64;
        let range = self.frame_range(segment);
        let mut out = Vec::new();
        let mut start = range.start;
        while start < range.end {
            let end = (start + size).min(range.end);
            out.push(FrameWindow {
                indices: start..end,
                segment: self.span_of(start..end),
            });
            if end == range.end {
                break;
            }
            start += stride;
        }
        out
    }

    /// Time span covered by a run of frames, clamped to the video.
    pub fn span_of(&self, indices: Range<u64>) -> VideoSegment {
        let fps = self.fps();
        let start = fps.timestamp_of(indices.start);
        let end_secs = fps.time_of(indices.end).ceil() as u32;
        let end = Timestamp::from_secs(end_secs.min(self.duration().secs())).max(start);
        VideoSegment::new(start, end).expect("ordered")
    }
}

fn uniform_indices(range: Range<u64>, segment: &VideoSegment, fps: FrameRate, k: usize) -> Vec<u64> {
    if k == 0 {
        return Vec::new();
    }
    let (first, last) = (range.start, range.end - 1);
    let s = segment.start().secs() as f64;
    let e = segment.end().secs() as f64;
    let mut out: Vec<u64> = Vec::with_capacity(k);
    for i in 0..k {
        let t = if k == 1 {
            s
        } else {
            s + i as f64 * (e - s) / (k - 1) as f64
        };
        let idx = fps.frame_at(t).clamp(first, last);
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}
