use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A position in a video, in whole seconds.
///
/// Renders as `MM:SS` with an unbounded minutes field, so a two hour mark
/// is `120:00`. Parsing also accepts `H:MM:SS`, which shows up in model
/// outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid timestamp `{token}`: {reason}")]
pub struct TimestampError {
    pub token: String,
    pub reason: &'static str,
}

impl TimestampError {
    fn new(token: &str, reason: &'static str) -> Self {
        Self {
            token: token.to_string(),
            reason,
        }
    }
}

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_secs(seconds: u32) -> Self {
        Timestamp(seconds)
    }

    /// Rounds half-up to whole seconds. Negative and non-finite inputs are
    /// rejected.
    pub fn from_secs_f64(seconds: f64) -> Option<Self> {
        if !seconds.is_finite() || seconds < 0.0 {
            return None;
        }
        let rounded = (seconds + 0.5).floor();
        if rounded > u32::MAX as f64 {
            return None;
        }
        Some(Timestamp(rounded as u32))
    }

    pub const fn secs(self) -> u32 {
        self.0
    }

    pub fn saturating_add(self, seconds: u32) -> Self {
        Timestamp(self.0.saturating_add(seconds))
    }
}

/// Parses `M+:SS` or `H+:MM:SS` into whole seconds.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, TimestampError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(TimestampError::new(text, "empty string"));
    }
    let fields: Vec<&str> = trimmed.split(':').collect();
    let total: u64 = match fields.as_slice() {
        [minutes, seconds] => {
            let m = leading_field(minutes, trimmed)?;
            let s = two_digit_field(seconds, trimmed)?;
            m * 60 + s
        }
        [hours, minutes, seconds] => {
            let h = leading_field(hours, trimmed)?;
            let m = two_digit_field(minutes, trimmed)?;
            let s = two_digit_field(seconds, trimmed)?;
            h * 3600 + m * 60 + s
        }
        [_] => return Err(TimestampError::new(trimmed, "missing `:` separator")),
        _ => return Err(TimestampError::new(trimmed, "too many `:` separators")),
    };
    u32::try_from(total)
        .map(Timestamp)
        .map_err(|_| TimestampError::new(trimmed, "value out of range"))
}

fn leading_field(field: &str, whole: &str) -> Result<u64, TimestampError> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(TimestampError::new(whole, "expected digits"));
    }
    field
        .parse::<u64>()
        .ok()
        .filter(|v| *v <= u32::MAX as u64)
        .ok_or_else(|| TimestampError::new(whole, "value out of range"))
}

fn two_digit_field(field: &str, whole: &str) -> Result<u64, TimestampError> {
    if field.len() != 2 || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(TimestampError::new(whole, "expected two digits"));
    }
    let value: u64 = field.parse().expect("two ascii digits");
    if value >= 60 {
        return Err(TimestampError::new(whole, "field must be below 60"));
    }
    Ok(value)
}

pub fn format_timestamp(t: Timestamp) -> String {
    format!("{:02}:{:02}", t.0 / 60, t.0 % 60)
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_timestamp(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Seconds(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(text) => parse_timestamp(&text).map_err(serde::de::Error::custom),
            Raw::Seconds(secs) => Timestamp::from_secs_f64(secs)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid seconds value {secs}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_minute_form() {
        assert_eq!(parse_timestamp("12:10").unwrap().secs(), 730);
        assert_eq!(parse_timestamp("00:00").unwrap().secs(), 0);
        assert_eq!(parse_timestamp("40:50").unwrap().secs(), 2450);
        assert_eq!(parse_timestamp("0:23").unwrap().secs(), 23);
    }

    #[test]
    fn parses_hour_form_leniently() {
        assert_eq!(parse_timestamp("01:25:00").unwrap().secs(), 5100);
        assert_eq!(parse_timestamp("1:00:01").unwrap().secs(), 3601);
    }

    #[test]
    fn formats_with_unbounded_minutes() {
        assert_eq!(format_timestamp(Timestamp::from_secs(730)), "12:10");
        assert_eq!(format_timestamp(Timestamp::from_secs(0)), "00:00");
        assert_eq!(format_timestamp(Timestamp::from_secs(7805)), "130:05");
        assert_eq!(format_timestamp(Timestamp::from_secs(7200)), "120:00");
    }

    #[test]
    fn rejects_malformed_text_naming_the_token() {
        let err = parse_timestamp("1210").unwrap_err();
        assert_eq!(err.token, "1210");
        assert!(err.to_string().contains("`1210`"));
        assert!(parse_timestamp("12:60").is_err());
        assert!(parse_timestamp("ab:10").is_err());
        assert!(parse_timestamp("12:1").is_err());
        assert!(parse_timestamp(":10").is_err());
        assert!(parse_timestamp("1:2:3:4").is_err());
        assert!(parse_timestamp("").is_err());
        assert!(parse_timestamp("01:75:00").is_err());
    }

    #[test]
    fn half_up_rounding_at_ingestion() {
        assert_eq!(Timestamp::from_secs_f64(10.5).unwrap().secs(), 11);
        assert_eq!(Timestamp::from_secs_f64(10.49).unwrap().secs(), 10);
        assert!(Timestamp::from_secs_f64(-1.0).is_none());
        assert!(Timestamp::from_secs_f64(f64::NAN).is_none());
    }

    #[test]
    fn serde_uses_mm_ss_strings_and_accepts_seconds() {
        let t = Timestamp::from_secs(150);
        assert_eq!(serde_json::to_string(&t).unwrap(), "\"02:30\"");
        let back: Timestamp = serde_json::from_str("\"02:30\"").unwrap();
        assert_eq!(back, t);
        let from_num: Timestamp = serde_json::from_str("149.5").unwrap();
        assert_eq!(from_num, t);
    }

    proptest! {
        #[test]
        fn format_then_parse_round_trips(secs in 0u32..10_000_000) {
            let t = Timestamp::from_secs(secs);
            prop_assert_eq!(parse_timestamp(&format_timestamp(t)).unwrap(), t);
        }
    }
}
