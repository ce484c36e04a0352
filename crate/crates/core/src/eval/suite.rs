//! A synthetic suite of fixture videos with known winning strategies, used
//! to exercise the whole pipeline end to end with the oracle tools.
//!
//! Three families:
//! - locality: an earlier distractor answers the question wrongly for any
//!   whole-video look; only localizing the named scene first finds the
//!   right frames (strategy C of the visual profile).
//! - poisoned: find_when is led to a distractor scene holding a wrong
//!   answer, while whole-video retrieval sees the true one first
//!   (strategies A and B).
//! - ranges: find_when also returns a distractor range; only checking each
//!   range with retrieval_qa drops it (strategy C of the range profile).

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::domain::{format_timestamp, Timestamp};
use crate::toolkit::StrategyLabel;

pub const LOCALITY_ITEMS: usize = 14;
pub const POISONED_ITEMS: usize = 6;
pub const RANGE_ITEMS: usize = 6;

const OBJECTS: [&str; 7] = ["kite", "umbrella", "scarf", "backpack", "bicycle", "lantern", "teapot"];
const PLACES: [&str; 7] = ["rooftop", "harbor", "greenhouse", "library", "stadium", "orchard", "subway"];
const COLORS: [&str; 6] = ["navy", "crimson", "olive", "amber", "violet", "teal"];
const ACTIONS: [(&str, &str, &str, &str); 6] = [
    ("chef", "flip", "flips", "pancake"),
    ("dog", "catch", "catches", "frisbee"),
    ("child", "climb", "climbs", "ladder"),
    ("cyclist", "repair", "repairs", "tire"),
    ("diver", "grab", "grabs", "anchor"),
    ("painter", "mix", "mixes", "paint"),
];

/// Paths and construction facts of a written suite.
#[derive(Debug, Clone)]
pub struct Suite {
    pub dir: PathBuf,
    /// Multiple-choice items, for the visual profile.
    pub choice_dataset: PathBuf,
    /// Temporal range items, for the range profile.
    pub range_dataset: PathBuf,
    /// Critic replies by task id, naming the constructed winners.
    pub verdicts: PathBuf,
    pub locality: Vec<String>,
    pub poisoned: Vec<String>,
    pub ranges: Vec<String>,
    pub winners: BTreeMap<String, Vec<StrategyLabel>>,
}

fn ts(secs: u32) -> String {
    format_timestamp(Timestamp::from_secs(secs))
}

fn event(start: u32, end: u32, label: &str) -> Value {
    json!({"start": ts(start), "end": ts(end), "label": label, "justification": format!("Frames show the {label}.")})
}

fn fact(start: u32, end: u32, keywords: &[&str], answer: &str) -> Value {
    json!({"start": ts(start), "end": ts(end), "keywords": keywords, "answer": answer})
}

fn fixture(duration: u32, events: Vec<Value>, facts: Vec<Value>) -> Value {
    json!({"duration": ts(duration), "fps": 1, "events": events, "qa_facts": facts})
}

fn options(i: usize) -> Vec<&'static str> {
    (0..4).map(|k| COLORS[(i + k) % COLORS.len()]).collect()
}

fn verdict(critique: &str, winners: &[StrategyLabel]) -> String {
    let names: Vec<String> = winners.iter().map(ToString::to_string).collect();
    format!("{critique}\n\nWinning Strategies:\n{}", names.join(", "))
}

struct Writer<'a> {
    dir: &'a Path,
    suite: Suite,
    choice: Vec<String>,
    range: Vec<String>,
    verdicts: BTreeMap<String, String>,
}

impl Writer<'_> {
    fn video(&self, id: &str, fx: &Value) -> io::Result<String> {
        let rel = format!("videos/{id}.json");
        std::fs::write(self.dir.join(&rel), serde_json::to_string_pretty(fx)?)?;
        Ok(rel)
    }

    fn win(&mut self, id: &str, winners: &[char], critique: String) {
        let labels: Vec<StrategyLabel> = winners.iter().map(|c| StrategyLabel(*c)).collect();
        self.verdicts.insert(id.to_string(), verdict(&critique, &labels));
        self.suite.winners.insert(id.to_string(), labels);
    }

    fn locality(&mut self, i: usize) -> io::Result<()> {
        let id = format!("locality-{i:02}");
        let (obj, place) = (OBJECTS[i % 7], PLACES[(3 * i + 1) % 7]);
        let opts = options(i);
        let (right, wrong) = (i % 4, (i + 1) % 4);
        let duration = 1200 + 37 * i as u32;
        let (d, e) = (120 + 10 * i as u32, 700 + 13 * i as u32);
        let fx = fixture(
            duration,
            vec![
                event(0, 15, "opening title card"),
                event(d, d + 30, "crowd crossing a street"),
                event(e, e + 40, &format!("host arrives at the {place}")),
                event(duration - 20, duration, "closing credits"),
            ],
            vec![
                fact(d + 5, d + 20, &[obj, "color"], &format!("A {} {obj} passes by.", opts[wrong])),
                fact(e + 10, e + 20, &[obj, "color"], &format!("The {obj} at the {place} is {}.", opts[right])),
            ],
        );
        let video = self.video(&id, &fx)?;
        let question = format!("What color is the {obj} at the {place}?");
        self.choice.push(json!({"id": id, "video": video, "question": question, "options": opts, "answer": right + 1}).to_string());
        self.win(
            &id,
            &['C'],
            format!(
                "Strategies A and B looked at the whole video and reported the {obj} seen in the street scene at {}, which is not the {place}. Strategy C first located the {place} scene and read the answer there.",
                ts(d)
            ),
        );
        self.suite.locality.push(id);
        Ok(())
    }

    fn poisoned(&mut self, j: usize) -> io::Result<()> {
        let id = format!("poisoned-{j:02}");
        let (obj, place) = (OBJECTS[(j + 3) % 7], PLACES[(2 * j + 5) % 7]);
        let opts = options(j + 2);
        let (right, wrong) = ((j + 2) % 4, (j + 3) % 4);
        let duration = 1500 + 29 * j as u32;
        let (t, p) = (200 + 11 * j as u32, 900 + 17 * j as u32);
        let fx = fixture(
            duration,
            vec![
                event(t - 10, t + 30, "crowd crossing a street"),
                event(p, p + 40, &format!("poster advertising the {place}")),
            ],
            vec![
                fact(t, t + 20, &[obj, "color"], &format!("The {obj} at the {place} is {}.", opts[right])),
                fact(p + 5, p + 25, &[obj, "color"], &format!("The poster shows a {} {obj}.", opts[wrong])),
            ],
        );
        let video = self.video(&id, &fx)?;
        let question = format!("What color is the {obj} at the {place}?");
        self.choice.push(json!({"id": id, "video": video, "question": question, "options": opts, "answer": right + 1}).to_string());
        self.win(
            &id,
            &['A', 'B'],
            format!(
                "Strategy C trusted a find_when range that only shows a poster of the {place}, so its answer describes the poster. Strategies A and B saw the {obj} itself."
            ),
        );
        self.suite.poisoned.push(id);
        Ok(())
    }

    fn ranges(&mut self, k: usize) -> io::Result<()> {
        let id = format!("ranges-{k:02}");
        let (actor, verb, verbs, obj) = ACTIONS[k];
        let duration = 600 + 41 * k as u32;
        let a = 60 + 7 * k as u32;
        let mut truth = vec![(a, a + 25)];
        if k % 2 == 0 {
            truth.push((a + 300, a + 330));
        }
        let distractor = a + 150;
        let mut events = vec![event(distractor, distractor + 20, &format!("{actor} walks past the camera"))];
        let mut facts = Vec::new();
        for (s, e) in &truth {
            events.push(event(*s, *e, &format!("{actor} {verbs} the {obj}")));
            facts.push(fact(*s, *e, &[obj], &format!("Yes, the {actor} {verbs} the {obj} here.")));
        }
        let video = self.video(&id, &fixture(duration, events, facts))?;
        let question = format!("When does the {actor} {verb} the {obj}?");
        let answer: Vec<[u32; 2]> = truth.iter().map(|(s, e)| [*s, *e]).collect();
        self.range.push(json!({"id": id, "video": video, "question": question, "answer": answer}).to_string());
        self.win(
            &id,
            &['C'],
            format!(
                "Strategies A and B kept the range at {} where the {actor} only walks past. Strategy C checked each range and kept only those showing the {obj}.",
                ts(distractor)
            ),
        );
        self.suite.ranges.push(id);
        Ok(())
    }
}

/// Writes the suite's fixtures, datasets and critic replies under `dir`.
pub fn write_suite(dir: impl AsRef<Path>) -> io::Result<Suite> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("videos"))?;
    let mut w = Writer {
        dir,
        suite: Suite {
            dir: dir.to_path_buf(),
            choice_dataset: dir.join("choice.jsonl"),
            range_dataset: dir.join("ranges.jsonl"),
            verdicts: dir.join("verdicts.json"),
            locality: Vec::new(),
            poisoned: Vec::new(),
            ranges: Vec::new(),
            winners: BTreeMap::new(),
        },
        choice: Vec::new(),
        range: Vec::new(),
        verdicts: BTreeMap::new(),
    };
    for i in 0..LOCALITY_ITEMS {
        w.locality(i)?;
    }
    for j in 0..POISONED_ITEMS {
        w.poisoned(j)?;
    }
    for k in 0..RANGE_ITEMS {
        w.ranges(k)?;
    }
    std::fs::write(&w.suite.choice_dataset, w.choice.join("\n") + "\n")?;
    std::fs::write(&w.suite.range_dataset, w.range.join("\n") + "\n")?;
    std::fs::write(&w.suite.verdicts, serde_json::to_string_pretty(&w.verdicts)?)?;
    Ok(w.suite)
}
