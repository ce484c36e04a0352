//! Value types shared by every other module.

mod answer;
mod iou;
mod segment;
mod task;
mod timestamp;

pub use answer::{parse_final_answer, score, FinalAnswer};
pub use iou::{interval_union_iou, normalize_union};
pub use segment::{FrameRate, SegmentError, VideoSegment};
pub use task::{TaskError, TaskKind, TaskQuery, VideoRef, VideoSourceKind};
pub use timestamp::{format_timestamp, parse_timestamp, Timestamp, TimestampError};
