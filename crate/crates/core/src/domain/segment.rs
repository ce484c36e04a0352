use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::timestamp::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("segment start {start} is after end {end}")]
    Inverted { start: Timestamp, end: Timestamp },
    #[error("segment end {end} exceeds video duration {duration}")]
    OutOfRange { end: Timestamp, duration: Timestamp },
}

/// A closed time span `[start, end]` of a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VideoSegment {
    start: Timestamp,
    end: Timestamp,
}

impl VideoSegment {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, SegmentError> {
        if start > end {
            return Err(SegmentError::Inverted { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn from_secs(start: u32, end: u32) -> Result<Self, SegmentError> {
        Self::new(Timestamp::from_secs(start), Timestamp::from_secs(end))
    }

    /// The whole video, `[0, duration]`.
    pub fn full(duration: Timestamp) -> Self {
        Self {
            start: Timestamp::ZERO,
            end: duration,
        }
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn len_secs(&self) -> u32 {
        self.end.secs() - self.start.secs()
    }

    pub fn is_degenerate(&self) -> bool {
        self.start == self.end
    }

    pub fn check_within(&self, duration: Timestamp) -> Result<(), SegmentError> {
        if self.end > duration {
            return Err(SegmentError::OutOfRange {
                end: self.end,
                duration,
            });
        }
        Ok(())
    }

    /// True when the two closed spans share at least one point.
    pub fn intersects(&self, other: &VideoSegment) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

impl fmt::Display for VideoSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "['{}', '{}']", self.start, self.end)
    }
}

impl Serialize for VideoSegment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.start, self.end).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VideoSegment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (start, end) = <(Timestamp, Timestamp)>::deserialize(deserializer)?;
        VideoSegment::new(start, end).map_err(serde::de::Error::custom)
    }
}

/// Frames per second of a sampled stream, kept as an exact ratio so that
/// frame/time conversions are integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRate {
    num: u64,
    den: u64,
}

impl FrameRate {
    pub const ONE: FrameRate = FrameRate { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        if num == 0 || den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// Accepts any positive finite rate; stored to millihertz precision.
    pub fn from_f64(fps: f64) -> Option<Self> {
        if !fps.is_finite() || fps <= 0.0 || fps > 1.0e6 {
            return None;
        }
        let milli = (fps * 1000.0).round() as u64;
        Self::new(milli, 1000)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Number of frames in a stream of the given length, `floor(secs * fps)`.
    pub fn frames_in(&self, duration: Timestamp) -> u64 {
        duration.secs() as u64 * self.num / self.den
    }

    /// First frame whose time is at or after `t`, `ceil(t * fps)`.
    pub fn frame_at_or_after(&self, t: Timestamp) -> u64 {
        (t.secs() as u64 * self.num).div_ceil(self.den)
    }

    /// Frame covering time `t` in seconds, `floor(t * fps)`.
    pub fn frame_at(&self, secs: f64) -> u64 {
        (secs * self.as_f64()).floor().max(0.0) as u64
    }

    /// Presentation time of a frame in seconds.
    pub fn time_of(&self, index: u64) -> f64 {
        index as f64 * self.den as f64 / self.num as f64
    }

    /// Presentation time of a frame truncated to whole seconds.
    pub fn timestamp_of(&self, index: u64) -> Timestamp {
        Timestamp::from_secs((index * self.den / self.num).min(u32::MAX as u64) as u32)
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        Self::ONE
    }
}

impl Serialize for FrameRate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.den == 1 {
            serializer.serialize_u64(self.num)
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for FrameRate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let fps = f64::deserialize(deserializer)?;
        FrameRate::from_f64(fps)
            .ok_or_else(|| serde::de::Error::custom(format!("fps must be positive, got {fps}")))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted() {
        assert!(VideoSegment::from_secs(5, 4).is_err());
        assert!(VideoSegment::from_secs(4, 4).unwrap().is_degenerate());
    }

    #[test]
    fn renders_like_the_tool_api() {
        let s = VideoSegment::from_secs(150, 175).unwrap();
        assert_eq!(s.to_string(), "['02:30', '02:55']");
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"["02:30","02:55"]"#);
    }

    #[test]
    fn bounds_check() {
        let s = VideoSegment::from_secs(0, 120).unwrap();
        assert!(s.check_within(Timestamp::from_secs(90)).is_err());
        assert!(s.check_within(Timestamp::from_secs(120)).is_ok());
    }

    #[test]
    fn frame_rate_arithmetic() {
        let r = FrameRate::from_f64(2.0).unwrap();
        assert_eq!(r.frames_in(Timestamp::from_secs(60)), 120);
        assert_eq!(r.frame_at_or_after(Timestamp::from_secs(3)), 6);
        let third = FrameRate::new(1, 3).unwrap();
        assert_eq!(third.frames_in(Timestamp::from_secs(10)), 3);
        assert_eq!(third.frame_at_or_after(Timestamp::from_secs(4)), 2);
        assert_eq!(third.timestamp_of(2).secs(), 6);
        assert!(FrameRate::from_f64(0.0).is_none());
        assert_eq!(serde_json::to_string(&FrameRate::ONE).unwrap(), "1");
    }
}
