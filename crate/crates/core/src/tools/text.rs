use std::collections::BTreeSet;

use crate::domain::VideoSegment;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "by", "for", "from", "with", "as",
    "is", "are", "was", "were", "be", "been", "being", "do", "does", "did", "has", "have", "had", "it",
    "its", "this", "that", "these", "those", "there", "i", "me", "my", "we", "our", "you", "your", "he",
    "him", "his", "she", "her", "they", "them", "their", "what", "when", "where", "which", "who", "whom",
    "why", "how", "video", "s",
];

/// Lowercased alphanumeric tokens minus stopwords.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// `(1) first\n(2) second\n`, or nothing without options.
pub fn render_options(options: Option<&[String]>) -> String {
    options
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(i, o)| format!("({}) {o}\n", i + 1))
        .collect()
}

/// One find_when result line: `["MM:SS", "MM:SS"]: justification`.
pub fn range_line(segment: &VideoSegment, justification: &str) -> String {
    format!("[\"{}\", \"{}\"]: {justification}", segment.start(), segment.end())
}

/// Index of the longest option whose text occurs in `answer`, 1-based.
pub fn option_in(answer: &str, options: &[String]) -> Option<u32> {
    let lower = answer.to_lowercase();
    options
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.trim().is_empty() && lower.contains(&o.trim().to_lowercase()))
        .max_by_key(|(i, o)| (o.trim().len(), std::cmp::Reverse(*i)))
        .map(|(i, _)| i as u32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_drop_stopwords() {
        let t = content_tokens("When is the trampoline first used?");
        assert_eq!(t.into_iter().collect::<Vec<_>>(), ["first", "trampoline", "used"]);
    }

    #[test]
    fn options_render() {
        let o = vec!["red".to_string(), "blue".to_string()];
        assert_eq!(render_options(Some(&o)), "(1) red\n(2) blue\n");
        assert_eq!(render_options(None), "");
    }

    #[test]
    fn option_match_prefers_longest() {
        let o = vec!["red".to_string(), "dark red".to_string(), "blue".to_string()];
        assert_eq!(option_in("The car is dark red.", &o), Some(2));
        assert_eq!(option_in("It is Blue", &o), Some(3));
        assert_eq!(option_in("green", &o), None);
    }

    #[test]
    fn line_shape() {
        let s = VideoSegment::from_secs(150, 175).unwrap();
        assert_eq!(range_line(&s, "jumping"), "[\"02:30\", \"02:55\"]: jumping");
    }
}
