use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::domain::TaskKind;

const MODULE_API: &str = include_str!("../../prompts/module_api.txt");

/// Built-in tool names in the order the API listing presents them.
pub const BUILTIN_ORDER: &[&str] = &[
    "think",
    "get_segment",
    "find_when",
    "asr_understanding",
    "retrieval_qa",
    "finish",
];

pub const THINK: &str = "think";
pub const GET_SEGMENT: &str = "get_segment";
pub const FIND_WHEN: &str = "find_when";
pub const ASR_UNDERSTANDING: &str = "asr_understanding";
pub const RETRIEVAL_QA: &str = "retrieval_qa";
pub const FINISH: &str = "finish";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Str,
    StrList,
    Segment,
    Int,
    Any,
}

impl ParamType {
    fn annotation(self) -> &'static str {
        match self {
            ParamType::Str => "str",
            ParamType::StrList => "list[str]",
            ParamType::Segment => "VideoSegment",
            ParamType::Int => "int",
            ParamType::Any => "object",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    #[serde(default)]
    pub optional: bool,
}

impl ParamSpec {
    pub fn required(name: &str, ty: ParamType) -> Self {
        Self {
            name: name.to_string(),
            ty,
            optional: false,
        }
    }

    pub fn optional(name: &str, ty: ParamType) -> Self {
        Self {
            name: name.to_string(),
            ty,
            optional: true,
        }
    }
}

/// A callable tool as the agent sees it: signature plus docstring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    #[serde(default = "default_returns")]
    pub returns: String,
    pub doc: String,
    /// Task kinds this module can answer directly.
    #[serde(default)]
    pub answer_kinds: Vec<TaskKind>,
    /// Verbatim prompt text for built-ins; custom tools are rendered.
    #[serde(skip)]
    pub api_block: Option<String>,
}

fn default_returns() -> String {
    "str".to_string()
}

impl ModuleSpec {
    pub fn answer_capable(&self) -> bool {
        !self.answer_kinds.is_empty()
    }

    pub fn can_answer(&self, kind: TaskKind) -> bool {
        self.answer_kinds.contains(&kind)
    }

    pub fn is_builtin(&self) -> bool {
        BUILTIN_ORDER.contains(&self.name.as_str())
    }

    /// Header plus docstring, in the shape of the built-in listing.
    pub fn render(&self) -> String {
        if let Some(block) = &self.api_block {
            return block.clone();
        }
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| {
                let mut t = format!("{}: {}", p.name, p.ty.annotation());
                if p.optional {
                    t.push_str(" | None");
                }
                t
            })
            .collect();
        let mut out = format!("def {}({}) -> {}:\n", self.name, params.join(", "), self.returns);
        let mut lines = self.doc.lines();
        out.push_str(&format!("  \"\"\"{}\n", lines.next().unwrap_or_default()));
        for line in lines {
            if line.is_empty() {
                out.push('\n');
            } else {
                out.push_str(&format!("  {line}\n"));
            }
        }
        out.push_str("  \"\"\"\n\n");
        out
    }
}

struct Listing {
    preamble: String,
    blocks: Vec<(String, String)>,
}

/// Splits the API listing into the leading dataclass block and one verbatim
/// block per tool. Each block runs up to the next one, so separators are
/// preserved exactly.
fn listing() -> &'static Listing {
    static L: OnceLock<Listing> = OnceLock::new();
    L.get_or_init(|| {
        let mut starts: Vec<(usize, Option<String>)> = Vec::new();
        let mut offset = 0;
        for line in MODULE_API.split_inclusive('\n') {
            if let Some(rest) = line.strip_prefix("def ") {
                let name = rest.split('(').next().unwrap_or_default().to_string();
                starts.push((offset, Some(name)));
            }
            offset += line.len();
        }
        let preamble = MODULE_API[..starts[0].0].to_string();
        let mut blocks = Vec::new();
        for (i, (start, name)) in starts.iter().enumerate() {
            let end = starts.get(i + 1).map(|s| s.0).unwrap_or(MODULE_API.len());
            blocks.push((name.clone().unwrap(), MODULE_API[*start..end].to_string()));
        }
        Listing { preamble, blocks }
    })
}

/// Dataclass definition that precedes the tools in every rendering.
pub fn api_preamble() -> &'static str {
    &listing().preamble
}

fn docstring(block: &str) -> String {
    let open = block.find("\"\"\"").expect("docstring open") + 3;
    let close = block.rfind("\"\"\"").expect("docstring close");
    block[open..close].to_string()
}

/// The spec for a built-in tool, or `None` for any other name.
pub fn builtin_spec(name: &str) -> Option<ModuleSpec> {
    use ParamType::*;
    let (params, returns, answer_kinds): (Vec<ParamSpec>, &str, Vec<TaskKind>) = match name {
        THINK => (vec![ParamSpec::required("thought", Str)], "None", vec![]),
        GET_SEGMENT => (
            vec![ParamSpec::required("start", Str), ParamSpec::required("end", Str)],
            "VideoSegment",
            vec![],
        ),
        FIND_WHEN => (
            vec![
                ParamSpec::required("query", Str),
                ParamSpec::optional("video_segment", Segment),
            ],
            "str",
            vec![TaskKind::TemporalRange],
        ),
        ASR_UNDERSTANDING => (
            vec![
                ParamSpec::required("question", Str),
                ParamSpec::optional("answer_options", StrList),
            ],
            "str",
            vec![],
        ),
        RETRIEVAL_QA => (
            vec![
                ParamSpec::required("question", Str),
                ParamSpec::optional("answer_options", StrList),
                ParamSpec::optional("video_segment", Segment),
            ],
            "str",
            vec![TaskKind::MultipleChoice],
        ),
        FINISH => (vec![ParamSpec::required("final_answer", Str)], "str", vec![]),
        _ => return None,
    };
    let block = listing()
        .blocks
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, b)| b.clone())
        .expect("every built-in appears in the listing");
    Some(ModuleSpec {
        name: name.to_string(),
        params,
        returns: returns.to_string(),
        doc: docstring(&block),
        answer_kinds,
        api_block: Some(block),
    })
}

pub fn module_api_listing() -> &'static str {
    MODULE_API
}
