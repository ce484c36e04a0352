//! Prompt catalog: plain-text templates with `{name}` placeholders.
//!
//! Defaults are compiled in. A catalog directory may override any of them
//! by holding a file with the same name.

use std::collections::BTreeMap;
use std::path::Path;

macro_rules! defaults {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../prompts/", $name, ".txt")))),*]
    };
}

const DEFAULTS: &[(&str, &str)] = defaults![
    "agent_preamble",
    "critic_preamble",
    "module_api",
    "find_when_window",
    "find_when_direct",
    "retrieval_select",
    "retrieval_answer",
    "asr_chunk",
    "asr_consolidate",
    "forced_answer",
    "corrective",
    "confidence",
    "single_program",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    templates: BTreeMap<String, String>,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            templates: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl Prompts {
    /// Defaults overridden by any `<name>.txt` found in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut p = Self::default();
        for (name, _) in DEFAULTS {
            let path = dir.as_ref().join(format!("{name}.txt"));
            if path.exists() {
                p.templates.insert(name.to_string(), std::fs::read_to_string(path)?);
            }
        }
        Ok(p)
    }

    pub fn get(&self, name: &str) -> &str {
        self.templates
            .get(name)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unknown prompt template `{name}`"))
    }

    pub fn set(&mut self, name: &str, text: impl Into<String>) {
        self.templates.insert(name.to_string(), text.into());
    }

    /// Substitutes `{key}` placeholders in one pass, so substituted values
    /// are never rescanned.
    pub fn fill(&self, name: &str, vars: &[(&str, &str)]) -> String {
        fill_template(self.get(name), vars)
    }
}

pub fn fill_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
