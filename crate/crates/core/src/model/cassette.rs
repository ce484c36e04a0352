use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::request::{fingerprint, ModelRequest};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    Record,
    Replay,
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub tag: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Divergence {
    Mismatch {
        tag: String,
        expected: String,
        actual: String,
    },
    Exhausted {
        tag: String,
    },
}

impl Divergence {
    pub fn tag(&self) -> &str {
        match self {
            Divergence::Mismatch { tag, .. } | Divergence::Exhausted { tag } => tag,
        }
    }
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::Mismatch {
                tag,
                expected,
                actual,
            } => write!(
                f,
                "request `{tag}` does not match the recording (expected {}, got {})",
                &expected[..12.min(expected.len())],
                &actual[..12.min(actual.len())]
            ),
            Divergence::Exhausted { tag } => write!(f, "no recorded response left for `{tag}`"),
        }
    }
}

#[derive(Default)]
struct State {
    recorded: Vec<CassetteEntry>,
    queues: BTreeMap<String, VecDeque<CassetteEntry>>,
    divergences: Vec<Divergence>,
}

/// Record/replay store for model calls, keyed by request tag so that
/// concurrent episodes replay independently of scheduling order.
pub struct Cassette {
    mode: CassetteMode,
    path: Option<PathBuf>,
    state: Mutex<State>,
}

impl Cassette {
    pub fn passthrough() -> Self {
        Self::empty(CassetteMode::Passthrough, None)
    }

    pub fn recorder(path: Option<PathBuf>) -> Self {
        Self::empty(CassetteMode::Record, path)
    }

    fn empty(mode: CassetteMode, path: Option<PathBuf>) -> Self {
        Self {
            mode,
            path,
            state: Mutex::new(State::default()),
        }
    }

    pub fn replay_entries(entries: Vec<CassetteEntry>) -> Self {
        let mut state = State::default();
        for e in entries {
            state.queues.entry(e.tag.clone()).or_default().push_back(e);
        }
        Self {
            mode: CassetteMode::Replay,
            path: None,
            state: Mutex::new(state),
        }
    }

    pub fn load_replay(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("cannot read cassette {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(line).map_err(|e| {
                ModelError::Config(format!("{}:{}: bad cassette entry: {e}", path.display(), i + 1))
            })?;
            entries.push(entry);
        }
        let mut c = Self::replay_entries(entries);
        c.path = Some(path.to_path_buf());
        Ok(c)
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Next recorded response for this request's tag.
    pub fn replay(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let fp = fingerprint(req);
        let mut st = self.state.lock().unwrap();
        let next = st.queues.get_mut(&req.tag).and_then(|q| q.pop_front());
        let divergence = match next {
            Some(e) if e.fingerprint == fp => return Ok(e.response),
            Some(e) => Divergence::Mismatch {
                tag: req.tag.clone(),
                expected: e.fingerprint,
                actual: fp,
            },
            None => Divergence::Exhausted {
                tag: req.tag.clone(),
            },
        };
        st.divergences.push(divergence.clone());
        Err(ModelError::ReplayDivergence(divergence))
    }

    pub fn record(&self, req: &ModelRequest, response: &str) {
        let entry = CassetteEntry {
            fingerprint: fingerprint(req),
            tag: req.tag.clone(),
            response: response.to_string(),
        };
        self.state.lock().unwrap().recorded.push(entry);
    }

    pub fn divergences(&self) -> Vec<Divergence> {
        self.state.lock().unwrap().divergences.clone()
    }

    /// Recorded responses never consumed during replay.
    pub fn unconsumed(&self) -> usize {
        self.state.lock().unwrap().queues.values().map(VecDeque::len).sum()
    }

    /// Recorded entries in a deterministic order (by tag, then call order).
    pub fn entries(&self) -> Vec<CassetteEntry> {
        let mut out = self.state.lock().unwrap().recorded.clone();
        out.sort_by(|a, b| a.tag.cmp(&b.tag));
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in self.entries() {
            serde_json::to_writer(&mut file, &e)?;
            file.write_all(b"\n")?;
        }
        file.flush()
    }

    /// Writes to the path given at construction, if any.
    pub fn save(&self) -> std::io::Result<()> {
        match &self.path {
            Some(p) if self.mode == CassetteMode::Record => self.write_jsonl(p),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_then_replay_by_tag() {
        let rec = Cassette::recorder(None);
        let a1 = ModelRequest::text("a", "one");
        let b1 = ModelRequest::text("b", "two");
        rec.record(&b1, "B");
        rec.record(&a1, "A1");
        rec.record(&a1, "A2");
        let entries = rec.entries();
        assert_eq!(entries[0].tag, "a");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        rec.write_jsonl(&path).unwrap();

        let rep = Cassette::load_replay(&path).unwrap();
        assert_eq!(rep.replay(&b1).unwrap(), "B");
        assert_eq!(rep.replay(&a1).unwrap(), "A1");
        assert_eq!(rep.replay(&a1).unwrap(), "A2");
        assert!(matches!(
            rep.replay(&a1),
            Err(ModelError::ReplayDivergence(Divergence::Exhausted { .. }))
        ));
        assert_eq!(rep.divergences().len(), 1);
    }

    #[test]
    fn mismatch_is_reported() {
        let rec = Cassette::recorder(None);
        rec.record(&ModelRequest::text("a", "one"), "A");
        let rep = Cassette::replay_entries(rec.entries());
        let err = rep.replay(&ModelRequest::text("a", "changed")).unwrap_err();
        assert!(err.to_string().contains("does not match"), "{err}");
        assert_eq!(rep.divergences()[0].tag(), "a");
    }

    #[test]
    fn bad_lines_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{not json}\n").unwrap();
        let err = Cassette::load_replay(&path).err().unwrap();
        assert!(err.to_string().contains(":1:"), "{err}");
    }
}
