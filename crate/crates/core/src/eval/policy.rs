//! A rule-based stand-in for the agent and critic models. It reads the
//! prompt it is given, the way a model would, and answers deterministically:
//! localize with find_when when it can, check each candidate range with
//! retrieval_qa in time order, and commit to the first answer it finds.
//! Tool prompts are not served; pair it with the oracle tools.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use crate::domain::{parse_final_answer, FinalAnswer, TaskKind};
use crate::model::{ModelBackend, ModelError, ModelRequest};
use crate::tools::{option_in, NOT_VISIBLE, NO_RANGES, NO_SPEECH, NO_SPEECH_MATCH};

#[derive(Debug, Clone, Default)]
pub struct PolicyModel {
    /// Critic replies by task id. Without one the critic names no winner.
    verdicts: BTreeMap<String, String>,
}

impl PolicyModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_verdicts(verdicts: BTreeMap<String, String>) -> Self {
        Self { verdicts }
    }

    pub fn load_verdicts(path: impl AsRef<std::path::Path>) -> Result<Self, ModelError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|e| ModelError::Config(format!("cannot read verdicts {}: {e}", p.display())))?;
        let verdicts = serde_json::from_str(&text)
            .map_err(|e| ModelError::Config(format!("bad verdicts file {}: {e}", p.display())))?;
        Ok(Self { verdicts })
    }
}

enum Call<'a> {
    Turn,
    Forced,
    Single,
    Confidence,
    Critic(&'a str),
}

fn classify(tag: &str) -> Option<Call<'_>> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"^(?:(?P<task>.+)/(?P<critic>critic)\d*|.+/[A-Z]/(?:selfeval/)?(?:(?P<turn>turn\d+)|(?P<forced>forced\d*)|(?P<single>single)|(?P<conf>confidence\d+)))$",
        )
        .unwrap()
    });
    if tag.contains("/call") {
        return None;
    }
    let c = re.captures(tag)?;
    if c.name("critic").is_some() {
        return Some(Call::Critic(c.name("task").unwrap().as_str()));
    }
    Some(if c.name("turn").is_some() {
        Call::Turn
    } else if c.name("forced").is_some() {
        Call::Forced
    } else if c.name("single").is_some() {
        Call::Single
    } else {
        Call::Confidence
    })
}

/// What the policy can read off an agent prompt.
struct View {
    question: String,
    options: Vec<String>,
    length: String,
    modules: BTreeSet<&'static str>,
    steps: Vec<(String, String)>,
}

fn range_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\["(\d+:\d{2}(?::\d{2})?)", "(\d+:\d{2}(?::\d{2})?)"\]"#).unwrap())
}

fn segment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"get_segment\(start="([^"]+)", end="([^"]+)"\)"#).unwrap())
}

impl View {
    fn read(prompt: &str) -> Option<View> {
        let q = prompt.find("\nQuestion: ")? + 1;
        let rest = &prompt[q..];
        let len_at = rest.find("\nVideo length: ")? + 1;
        let block = &rest[..len_at];
        let after = &rest[len_at..];
        let length_line = after.lines().next()?;
        let question = block.lines().next()?.strip_prefix("Question: ")?.to_string();
        let options = block
            .lines()
            .filter_map(|l| {
                let (n, text) = l.strip_prefix('(')?.split_once(") ")?;
                n.parse::<u32>().ok().map(|_| text.to_string())
            })
            .collect();
        let api = &prompt[..q];
        let modules = ["find_when", "retrieval_qa", "get_segment", "asr_understanding"]
            .into_iter()
            .filter(|m| api.contains(&format!("def {m}(")))
            .collect();
        let history = &after[length_line.len()..];
        // Steps render as "```\nprogram\n```\nresult\n\n", so fences alternate
        // program and result.
        let pieces: Vec<&str> = history.split("```\n").collect();
        let steps = (1..pieces.len())
            .step_by(2)
            .map(|i| {
                let result = pieces.get(i + 1).map_or("", |r| r.trim_end());
                (pieces[i].trim_end().to_string(), result.to_string())
            })
            .collect();
        Some(View {
            question,
            options,
            length: length_line.trim_start_matches("Video length: ").trim().to_string(),
            modules,
            steps,
        })
    }

    fn kind(&self) -> TaskKind {
        if self.options.is_empty() {
            TaskKind::TemporalRange
        } else {
            TaskKind::MultipleChoice
        }
    }

    fn has(&self, m: &str) -> bool {
        self.modules.contains(m)
    }

    /// Ranges from the first find_when result.
    fn candidates(&self) -> Option<Vec<(String, String)>> {
        let (_, result) = self.steps.iter().find(|(p, _)| p.contains("find_when("))?;
        Some(
            range_re()
                .captures_iter(result)
                .map(|c| (c[1].to_string(), c[2].to_string()))
                .collect(),
        )
    }

    /// Results of segment checks so far, by range.
    fn checked(&self) -> BTreeMap<(String, String), String> {
        self.steps
            .iter()
            .filter_map(|(p, r)| {
                let c = segment_re().captures(p)?;
                Some(((c[1].to_string(), c[2].to_string()), r.clone()))
            })
            .collect()
    }

    fn tried(&self, tool: &str, whole_video: bool) -> bool {
        self.steps
            .iter()
            .any(|(p, _)| p.contains(&format!("{tool}(")) && (!whole_video || !p.contains("get_segment(")))
    }

    /// An option supported by some answering result, latest first.
    fn supported_choice(&self) -> Option<u32> {
        self.steps.iter().rev().find_map(|(p, r)| {
            if !(p.contains("retrieval_qa(") || p.contains("asr_understanding(")) || uninformative(r) {
                return None;
            }
            match parse_final_answer(r, TaskKind::MultipleChoice) {
                FinalAnswer::Choice(i) if (i as usize) <= self.options.len() => Some(i),
                _ => option_in(r, &self.options),
            }
        })
    }

    fn options_literal(&self) -> String {
        let quoted: Vec<String> = self.options.iter().map(|o| quote(o)).collect();
        format!("[{}]", quoted.join(", "))
    }

    fn retrieval(&self, segment: Option<&(String, String)>) -> String {
        let mut program = String::new();
        let mut args = format!("question={}", quote(&self.question));
        if self.kind() == TaskKind::MultipleChoice {
            args.push_str(&format!(", answer_options={}", self.options_literal()));
        }
        if let Some((a, b)) = segment {
            program.push_str(&format!("segment = get_segment(start=\"{a}\", end=\"{b}\")\n"));
            args.push_str(", video_segment=segment");
        }
        program.push_str(&format!("answer = retrieval_qa({args})"));
        program
    }

    fn find_when(&self) -> String {
        format!("ranges = find_when(query={})", quote(&self.question))
    }

    fn asr(&self) -> String {
        format!(
            "answer = asr_understanding(question={}, answer_options={})",
            quote(&self.question),
            self.options_literal()
        )
    }

    fn whole_video(&self) -> String {
        format!("[00:00, {}]", self.length)
    }
}

fn uninformative(result: &str) -> bool {
    result.starts_with("error:")
        || [NOT_VISIBLE, NO_RANGES, NO_SPEECH, NO_SPEECH_MATCH]
            .iter()
            .any(|m| result.contains(m))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn code(program: &str) -> String {
    format!("```\n{program}\n```")
}

fn finish(reason: &str, answer: &str) -> String {
    code(&format!("finish(final_answer={})", quote(&format!("{reason} Final Answer: {answer}"))))
}

fn next_choice_turn(v: &View) -> String {
    if v.steps.is_empty() {
        if v.has("find_when") && v.has("retrieval_qa") && v.has("get_segment") {
            return code(&v.find_when());
        }
        if v.has("retrieval_qa") {
            return code(&v.retrieval(None));
        }
        if v.has("asr_understanding") {
            return code(&v.asr());
        }
        return finish("No tool can look at the video.", "(1)");
    }
    if let Some(i) = v.supported_choice() {
        return finish("The retrieved evidence matches this option.", &format!("({i})"));
    }
    if let Some(candidates) = v.candidates() {
        let checked = v.checked();
        if let Some(next) = candidates.iter().find(|c| !checked.contains_key(*c)) {
            return code(&v.retrieval(Some(next)));
        }
    }
    if v.has("retrieval_qa") && !v.tried("retrieval_qa", true) {
        return code(&v.retrieval(None));
    }
    if v.has("asr_understanding") && !v.tried("asr_understanding", false) {
        return code(&v.asr());
    }
    finish("No tool located the answer, so this is a guess.", "(1)")
}

fn next_range_turn(v: &View) -> String {
    if !v.has("find_when") {
        return finish("Nothing can localize the query.", &v.whole_video());
    }
    let Some(candidates) = v.candidates() else {
        return code(&v.find_when());
    };
    if candidates.is_empty() {
        return finish("No range was found.", &v.whole_video());
    }
    let render = |rs: &[&(String, String)]| rs.iter().map(|(a, b)| format!("[{a}, {b}]")).collect::<Vec<_>>().join(", ");
    if v.has("retrieval_qa") && v.has("get_segment") {
        let checked = v.checked();
        if let Some(next) = candidates.iter().find(|c| !checked.contains_key(*c)) {
            return code(&v.retrieval(Some(next)));
        }
        let kept: Vec<&(String, String)> = candidates.iter().filter(|c| !uninformative(&checked[*c])).collect();
        if !kept.is_empty() {
            return finish("These ranges were confirmed by looking at them.", &render(&kept));
        }
    }
    let all: Vec<&(String, String)> = candidates.iter().collect();
    finish("These ranges were found.", &render(&all))
}

fn forced(v: &View) -> String {
    match v.kind() {
        TaskKind::MultipleChoice => match v.supported_choice() {
            Some(i) => format!("The retrieved evidence matches option {i}. Final Answer: ({i})"),
            None => "Nothing conclusive was found. Final Answer: (1)".to_string(),
        },
        TaskKind::TemporalRange => {
            let ranges: Vec<String> = v
                .candidates()
                .unwrap_or_default()
                .iter()
                .map(|(a, b)| format!("[{a}, {b}]"))
                .collect();
            let answer = if ranges.is_empty() { v.whole_video() } else { ranges.join(", ") };
            format!("Going with the localized ranges. Final Answer: {answer}")
        }
    }
}

/// A fixed program written without seeing any result.
fn single(v: &View) -> String {
    match v.kind() {
        TaskKind::MultipleChoice if v.has("retrieval_qa") => {
            code(&format!("{}\nfinish(final_answer=answer)", v.retrieval(None)))
        }
        TaskKind::MultipleChoice if v.has("asr_understanding") => {
            code(&format!("{}\nfinish(final_answer=answer)", v.asr()))
        }
        TaskKind::TemporalRange if v.has("find_when") => {
            code(&format!("{}\nfinish(final_answer=f\"Final Answer: {{ranges}}\")", v.find_when()))
        }
        TaskKind::MultipleChoice => finish("No tool can look at the video.", "(1)"),
        TaskKind::TemporalRange => finish("Nothing can localize the query.", &v.whole_video()),
    }
}

fn confidence(v: &View) -> String {
    let grounded = v
        .steps
        .iter()
        .any(|(p, r)| (p.contains("retrieval_qa(") || p.contains("asr_understanding(")) && !uninformative(r));
    if grounded { "3" } else { "2" }.to_string()
}

impl ModelBackend for PolicyModel {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let call = classify(&req.tag)
            .ok_or_else(|| ModelError::Config(format!("the policy model does not serve `{}`", req.tag)))?;
        if let Call::Critic(task) = call {
            return Ok(self
                .verdicts
                .get(task)
                .cloned()
                .unwrap_or_else(|| "No strategy is clearly better supported than the others.".to_string()));
        }
        let prompt = req.text_content();
        let v = View::read(&prompt)
            .ok_or_else(|| ModelError::Config(format!("`{}` does not look like an agent prompt", req.tag)))?;
        Ok(match (call, v.kind()) {
            (Call::Turn, TaskKind::MultipleChoice) => next_choice_turn(&v),
            (Call::Turn, TaskKind::TemporalRange) => next_range_turn(&v),
            (Call::Forced, _) => forced(&v),
            (Call::Single, _) => single(&v),
            (Call::Confidence, _) => confidence(&v),
            (Call::Critic(_), _) => unreachable!(),
        })
    }
}
