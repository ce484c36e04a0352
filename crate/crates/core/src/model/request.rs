use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fixtures::FrameRef;

/// Frames allowed in one request, about what a 32k context holds.
pub const DEFAULT_FRAME_BUDGET: usize = 120;
pub const DEFAULT_MAX_OUTPUT: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum PromptPart {
    Text(String),
    Frames(Vec<FrameRef>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub parts: Vec<PromptPart>,
    pub temperature: f32,
    pub max_output: u32,
    /// Episode/step identifier used to key cassette entries.
    pub tag: String,
}

impl ModelRequest {
    pub fn text(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(tag, vec![PromptPart::Text(text.into())])
    }

    pub fn new(tag: impl Into<String>, parts: Vec<PromptPart>) -> Self {
        Self {
            parts,
            temperature: 0.0,
            max_output: DEFAULT_MAX_OUTPUT,
            tag: tag.into(),
        }
    }

    /// All text parts joined, for backends that only read text.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        for p in &self.parts {
            if let PromptPart::Text(t) = p {
                out.push_str(t);
            }
        }
        out
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameRef> {
        self.parts.iter().flat_map(|p| match p {
            PromptPart::Frames(f) => f.as_slice(),
            PromptPart::Text(_) => &[],
        })
    }
}

pub fn budget_frames(parts: &[PromptPart]) -> usize {
    parts
        .iter()
        .map(|p| match p {
            PromptPart::Frames(f) => f.len(),
            PromptPart::Text(_) => 0,
        })
        .sum()
}

/// Stable digest of a request's content. The tag, temperature and output
/// budget are bookkeeping and do not participate.
pub fn fingerprint(req: &ModelRequest) -> String {
    let mut h = Sha256::new();
    for part in &req.parts {
        match part {
            PromptPart::Text(t) => {
                let norm = t.replace("\r\n", "\n");
                h.update(b"T");
                h.update((norm.len() as u64).to_le_bytes());
                h.update(norm.as_bytes());
            }
            PromptPart::Frames(frames) => {
                h.update(b"F");
                h.update((frames.len() as u64).to_le_bytes());
                for f in frames {
                    h.update((f.video.len() as u64).to_le_bytes());
                    h.update(f.video.as_bytes());
                    h.update(f.index.to_le_bytes());
                }
            }
        }
    }
    hex::encode(h.finalize())
}
