//! Synthetic annotated videos, frame sampling and windowing, and the
//! frames-directory adapter for live runs.

mod fixture;
mod video;

pub use fixture::{load_fixture, AsrLine, Event, FixtureError, FrameCaption, QaFact, VideoFixture};
pub use video::{
    FrameRef, FrameWindow, FramesDirectory, SamplePolicy, Video, VideoData, FRAMES_METADATA_FILE,
};
