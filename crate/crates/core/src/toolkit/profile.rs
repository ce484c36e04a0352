use std::fmt;

use serde::{Deserialize, Serialize};

use super::spec::{ASR_UNDERSTANDING, FINISH, FIND_WHEN, GET_SEGMENT, RETRIEVAL_QA, THINK};
use crate::domain::{TaskKind, TaskQuery};

/// Positional strategy letter: A is the first configured subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct StrategyLabel(pub char);

impl StrategyLabel {
    pub fn nth(i: usize) -> Self {
        StrategyLabel((b'A' + (i % 26) as u8) as char)
    }
}

impl fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<StrategyLabel> for String {
    fn from(l: StrategyLabel) -> String {
        l.0.to_string()
    }
}

impl TryFrom<String> for StrategyLabel {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_uppercase() => Ok(StrategyLabel(c)),
            _ => Err(format!("strategy label must be one capital letter, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySubset {
    pub label: StrategyLabel,
    /// Modules other than think and finish.
    pub modules: Vec<String>,
    #[serde(default)]
    pub direct: bool,
}

impl StrategySubset {
    /// What the episode may call: the modules plus think and finish, unless
    /// the subset applies one module directly.
    pub fn active_modules(&self) -> Vec<String> {
        let mut out = self.modules.clone();
        if !self.direct {
            for base in [THINK, FINISH] {
                if !out.iter().any(|m| m == base) {
                    out.push(base.to_string());
                }
            }
        }
        out
    }

    /// Header used in critic prompts, e.g. `Strategy A (retrieval_qa, get_segment)`
    /// or `Strategy B (direct retrieval_qa)`.
    pub fn heading(&self) -> String {
        let modules = self.modules.join(", ");
        if self.direct {
            format!("Strategy {} (direct {modules})", self.label)
        } else {
            format!("Strategy {} ({modules})", self.label)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetTemplate {
    pub modules: Vec<String>,
    #[serde(default)]
    pub direct: bool,
}

/// Dataset profile: which strategies to sample and which critic examples
/// to show. Profiles are data; built-ins cover the three task families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub kind: TaskKind,
    pub strategies: Vec<SubsetTemplate>,
    /// Module pool for the fixed-subset ablation.
    pub pool: Vec<String>,
    /// Key of the critic example set.
    pub examples: String,
}

fn tpl(modules: &[&str], direct: bool) -> SubsetTemplate {
    SubsetTemplate {
        modules: modules.iter().map(|s| s.to_string()).collect(),
        direct,
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Profile {
    pub fn visual_mcq() -> Self {
        Profile {
            name: "visual_mcq".into(),
            kind: TaskKind::MultipleChoice,
            strategies: vec![
                tpl(&[RETRIEVAL_QA, GET_SEGMENT], false),
                tpl(&[RETRIEVAL_QA], true),
                tpl(&[RETRIEVAL_QA, GET_SEGMENT, FIND_WHEN], false),
            ],
            pool: names(&[GET_SEGMENT, RETRIEVAL_QA, FIND_WHEN]),
            examples: "lvbench".into(),
        }
    }

    pub fn asr_mcq() -> Self {
        Profile {
            name: "asr_mcq".into(),
            kind: TaskKind::MultipleChoice,
            strategies: vec![
                tpl(&[GET_SEGMENT, RETRIEVAL_QA, ASR_UNDERSTANDING], false),
                tpl(&[RETRIEVAL_QA], true),
                tpl(&[GET_SEGMENT, RETRIEVAL_QA, FIND_WHEN, ASR_UNDERSTANDING], false),
            ],
            pool: names(&[GET_SEGMENT, RETRIEVAL_QA, FIND_WHEN, ASR_UNDERSTANDING]),
            examples: "neptune".into(),
        }
    }

    pub fn temporal_range() -> Self {
        Profile {
            name: "temporal_range".into(),
            kind: TaskKind::TemporalRange,
            strategies: vec![
                tpl(&[GET_SEGMENT, FIND_WHEN], false),
                tpl(&[FIND_WHEN], true),
                tpl(&[GET_SEGMENT, FIND_WHEN, RETRIEVAL_QA], false),
            ],
            pool: names(&[GET_SEGMENT, RETRIEVAL_QA, FIND_WHEN]),
            examples: "rtl".into(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "visual_mcq" => Some(Self::visual_mcq()),
            "asr_mcq" => Some(Self::asr_mcq()),
            "temporal_range" => Some(Self::temporal_range()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: &'static [&'static str] = &["visual_mcq", "asr_mcq", "temporal_range"];
}

/// Labelled subsets for one task. ASR is dropped when the task forbids it.
pub fn strategy_subsets(task: &TaskQuery, profile: &Profile) -> Vec<StrategySubset> {
    profile
        .strategies
        .iter()
        .enumerate()
        .map(|(i, t)| StrategySubset {
            label: StrategyLabel::nth(i),
            modules: t
                .modules
                .iter()
                .filter(|m| task.allow_asr || m.as_str() != ASR_UNDERSTANDING)
                .cloned()
                .collect(),
            direct: t.direct,
        })
        .collect()
}

/// Every nonempty subset of `pool` that contains at least one module for
/// which `answer_capable` holds, in binary counting order over the pool.
pub fn enumerate_fixed_subsets(pool: &[String], answer_capable: impl Fn(&str) -> bool) -> Vec<StrategySubset> {
    let n = pool.len().min(20);
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let modules: Vec<String> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pool[i].clone()).collect();
        if modules.iter().any(|m| answer_capable(m)) {
            out.push(StrategySubset {
                label: StrategyLabel::nth(out.len()),
                modules,
                direct: false,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Timestamp, VideoRef, VideoSourceKind};
    use crate::toolkit::spec::builtin_spec;

    fn task(kind: TaskKind, allow_asr: bool) -> TaskQuery {
        let video = VideoRef {
            source: VideoSourceKind::FixturePath("v.json".into()),
            duration: Timestamp::from_secs(60),
            fps: crate::domain::FrameRate::new(1, 1).unwrap(),
        };
        match kind {
            TaskKind::MultipleChoice => {
                TaskQuery::multiple_choice("t", "q?", vec!["a".into(), "b".into()], video, allow_asr)
            }
            TaskKind::TemporalRange => TaskQuery::temporal_range("t", "q?", video, allow_asr),
        }
        .unwrap()
    }

    fn mods(s: &StrategySubset) -> Vec<&str> {
        s.modules.iter().map(String::as_str).collect()
    }

    #[test]
    fn visual_profile() {
        let s = strategy_subsets(&task(TaskKind::MultipleChoice, false), &Profile::visual_mcq());
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().map(|x| x.label.0).collect::<String>(), "ABC");
        assert_eq!(mods(&s[0]), ["retrieval_qa", "get_segment"]);
        assert!(s[1].direct && mods(&s[1]) == ["retrieval_qa"]);
        assert_eq!(mods(&s[2]), ["retrieval_qa", "get_segment", "find_when"]);
        assert_eq!(s[0].heading(), "Strategy A (retrieval_qa, get_segment)");
        assert_eq!(s[1].heading(), "Strategy B (direct retrieval_qa)");
        assert_eq!(
            s[0].active_modules(),
            ["retrieval_qa", "get_segment", "think", "finish"]
        );
        assert_eq!(s[1].active_modules(), ["retrieval_qa"]);
    }

    #[test]
    fn asr_profile_and_removal() {
        let s = strategy_subsets(&task(TaskKind::MultipleChoice, true), &Profile::asr_mcq());
        assert!(s[0].modules.iter().any(|m| m == "asr_understanding"));
        assert!(s[2].modules.iter().any(|m| m == "asr_understanding"));
        let s = strategy_subsets(&task(TaskKind::MultipleChoice, false), &Profile::asr_mcq());
        assert!(s.iter().all(|x| !x.modules.iter().any(|m| m == "asr_understanding")));
    }

    #[test]
    fn temporal_profile() {
        let s = strategy_subsets(&task(TaskKind::TemporalRange, false), &Profile::temporal_range());
        assert_eq!(mods(&s[0]), ["get_segment", "find_when"]);
        assert!(s[1].direct && mods(&s[1]) == ["find_when"]);
        assert!(s[2].modules.iter().any(|m| m == "retrieval_qa"));
    }

    #[test]
    fn fixed_subset_counts() {
        let capable = |m: &str| builtin_spec(m).is_some_and(|s| s.answer_capable());
        // Oracle: subsets of the pool minus subsets avoiding every capable module.
        let pool = Profile::visual_mcq().pool;
        let subsets = enumerate_fixed_subsets(&pool, capable);
        assert_eq!(subsets.len(), (1 << 3) - (1 << 1));
        assert_eq!(subsets.len(), 6);
        let asr = Profile::asr_mcq().pool;
        assert_eq!(enumerate_fixed_subsets(&asr, capable).len(), (1 << 4) - (1 << 2));
    }

    #[test]
    fn label_serde() {
        let l: StrategyLabel = serde_json::from_str("\"B\"").unwrap();
        assert_eq!(l, StrategyLabel('B'));
        assert!(serde_json::from_str::<StrategyLabel>("\"ab\"").is_err());
        assert_eq!(serde_json::to_string(&l).unwrap(), "\"B\"");
    }

    #[test]
    fn profile_round_trips() {
        let p = Profile::asr_mcq();
        let back: Profile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);
    }
}
