//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use vidcritic::agent::{Agent, AgentSettings};
use vidcritic::critic::parse_verdict;
use vidcritic::dsl::{execute_program, fenced_blocks, parse_program, CallArgs, Environment, ToolCallError, ToolHost, ToolReturn, Value};
use vidcritic::eval::suite::{write_suite, Suite};
use vidcritic::eval::{load_dataset, Mode, ModelConfig, Pipeline, RunConfig, RunReport};
use vidcritic::fixtures::{Video, VideoFixture};
use vidcritic::model::{budget_frames, FnModel, ModelClient, ModelRequest, ScriptedModel};
use vidcritic::prompts::Prompts;
use vidcritic::toolkit::{EpisodeContext, StrategyLabel, StrategySubset, ToolArgs};
use vidcritic::tools::{builtin_registry, ToolBackend, ToolSettings};
use vidcritic::{interval_union_iou, TaskQuery, Timestamp, VideoSegment};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn core_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core"))
}

/// Answers every call with a plain string; `finish` ends the program.
struct StubHost;

impl ToolHost for StubHost {
    fn invoke(&self, name: &str, _args: CallArgs) -> Result<ToolReturn, ToolCallError> {
        Ok(ToolReturn::value(Value::Str(format!("stub output of {name}"))))
    }
}

fn dsl_corpus() -> Result<String, String> {
    let mut blocks = Vec::new();
    for set in ["lvbench", "neptune", "rtl", "egoschema"] {
        let path = core_dir().join(format!("data/critic/{set}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let examples: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for ex in examples {
            blocks.extend(fenced_blocks(ex["input_block"].as_str().unwrap_or_default()));
        }
    }
    ensure(blocks.len() >= 30, format!("only {} blocks", blocks.len()))?;
    let start = Instant::now();
    for b in &blocks {
        let program = parse_program(b).map_err(|e| format!("{e}\n{b}"))?;
        let mut env = Environment::new();
        let r = execute_program(&program, &mut env, &StubHost);
        if let Some(e) = &r.error {
            ensure(!e.contains("parse"), format!("{e}\n{b}"))?;
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("{} blocks parsed and executed in {took:?}", blocks.len()))
}

/// Covered 0.1 s cells of a segment list.
fn cells(segs: &[VideoSegment]) -> Vec<bool> {
    let mut out = vec![false; 10 * 200];
    for s in segs {
        for c in &mut out[s.start().secs() as usize * 10..s.end().secs() as usize * 10] {
            *c = true;
        }
    }
    out
}

fn grid_iou(a: &[VideoSegment], b: &[VideoSegment]) -> f64 {
    let (ca, cb) = (cells(a), cells(b));
    let inter = ca.iter().zip(&cb).filter(|(x, y)| **x && **y).count();
    let union = ca.iter().zip(&cb).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn seg(a: u32, b: u32) -> VideoSegment {
    VideoSegment::from_secs(a, b).unwrap()
}

fn random_segments(rng: &mut StdRng) -> Vec<VideoSegment> {
    (0..rng.gen_range(1..=4))
        .map(|_| {
            let a = rng.gen_range(0..180);
            seg(a, a + rng.gen_range(0..20))
        })
        .collect()
}

fn metric_oracle() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (p, t) = (random_segments(&mut rng), random_segments(&mut rng));
        let got = interval_union_iou(&p, &t);
        let want = grid_iou(&p, &t);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-3, format!("{p:?} vs {t:?}: {got} != {want}"))?;
    }
    let same = interval_union_iou(&[seg(30, 75)], &[seg(30, 75)]);
    ensure(same == 1.0, format!("identical gave {same}"))?;
    let shaped = interval_union_iou(&[seg(11, 24), seg(33, 41)], &[seg(11, 41)]);
    ensure((shaped - 0.7).abs() <= 1e-9, format!("two-range case gave {shaped}"))?;
    Ok(format!("100 random pairs within {worst:.1e}; identical 1.0; two-range 0.7"))
}

fn window_accounting() -> Result<String, String> {
    let mut rows = Vec::new();
    for n in [64u32, 65, 2450, 7200] {
        let windows = Arc::new(AtomicUsize::new(0));
        let selects = Arc::new(AtomicUsize::new(0));
        let max_frames = Arc::new(AtomicUsize::new(0));
        let (w, s, m) = (windows.clone(), selects.clone(), max_frames.clone());
        let model = FnModel::new(move |req: &ModelRequest| {
            m.fetch_max(budget_frames(&req.parts), Ordering::SeqCst);
            let tail = req.tag.rsplit('/').next().unwrap_or_default();
            if tail.starts_with('w') {
                w.fetch_add(1, Ordering::SeqCst);
                Ok("NONE".to_string())
            } else if tail.starts_with("select") {
                s.fetch_add(1, Ordering::SeqCst);
                Ok("0\n1".to_string())
            } else {
                Ok("Final Answer: (1)".to_string())
            }
        });
        let client = Arc::new(ModelClient::new(Arc::new(model)));
        let backend = ToolBackend::model(client, Arc::new(Prompts::default()), ToolSettings::default());
        let registry = builtin_registry(&backend).map_err(|e| e.to_string())?;
        let video = Arc::new(Video::from_fixture(format!("blank{n}"), VideoFixture::blank(Timestamp::from_secs(n))));
        let task = TaskQuery::multiple_choice("w", "What happens?", vec!["a".into(), "b".into()], video.video_ref(), false)
            .map_err(|e| e.to_string())?;
        let ctx = EpisodeContext::new(Arc::new(task), video, false, "w/A/turn1");
        let q = || ToolArgs::new().with("query", Value::Str("x".into()));
        registry.call_direct("find_when", q(), &ctx).map_err(|e| e.to_string())?;
        let q = ToolArgs::new().with("question", Value::Str("x".into()));
        registry.call_direct("retrieval_qa", q, &ctx).map_err(|e| e.to_string())?;
        let n = n as usize;
        let (w, s) = (windows.load(Ordering::SeqCst), selects.load(Ordering::SeqCst));
        ensure(w == n.div_ceil(100), format!("find_when on {n} frames made {w} window requests"))?;
        ensure(s == n.div_ceil(64), format!("retrieval_qa on {n} frames made {s} phase-1 requests"))?;
        let m = max_frames.load(Ordering::SeqCst);
        ensure(m <= 120, format!("a request on {n} frames carried {m} frames"))?;
        rows.push(format!("{n}:{w}/{s}"));
    }
    Ok(format!("frames:windows/selects {}; all requests within 120 frames", rows.join(" ")))
}

#[derive(Deserialize)]
struct ListedVerdict {
    listing: String,
    example: u32,
    response: String,
    winners: Vec<StrategyLabel>,
}

fn verdict_parsing() -> Result<String, String> {
    let path = core_dir().join("tests/data/listing_verdicts.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let listed: Vec<ListedVerdict> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let labels: Vec<StrategyLabel> = "ABC".chars().map(StrategyLabel).collect();
    ensure(
        listed.iter().any(|v| v.response.contains("Winning Strategy:\n")),
        "singular variant missing from the listed verdicts",
    )?;
    for v in &listed {
        let got = parse_verdict(&v.response, &labels).winners;
        ensure(got == v.winners, format!("{} example {}: {got:?} != {:?}", v.listing, v.example, v.winners))?;
    }
    // The four example listings print 15 verdicts in total.
    ensure(listed.len() == 15, format!("{} listed verdicts", listed.len()))?;
    Ok(format!("{} verdicts, singular heading included", listed.len()))
}

fn suite_pipeline(suite: &Suite) -> Pipeline {
    let config = RunConfig {
        model: ModelConfig {
            verdicts: Some(suite.verdicts.clone()),
            ..Default::default()
        },
        ..RunConfig::default()
    };
    Pipeline::from_config(config).unwrap()
}

fn mean_on(report: &RunReport, ids: &[String]) -> f64 {
    let s: Vec<f64> = report.items.iter().filter(|i| ids.contains(&i.task_id)).map(|i| i.score).collect();
    s.iter().sum::<f64>() / s.len() as f64
}

fn end_to_end_suite() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = write_suite(dir.path()).map_err(|e| e.to_string())?;
    let p = suite_pipeline(&suite);
    let items = load_dataset(&suite.choice_dataset, Some(&p.profile)).map_err(|e| e.to_string())?;
    ensure(items.len() >= 20, format!("only {} fixtures", items.len()))?;
    let critic = p.evaluate(&items, Mode::AgentCritic).map_err(|e| e.to_string())?;
    let agent = p.evaluate(&items, Mode::Agent).map_err(|e| e.to_string())?;
    let acc = critic.aggregate.accuracy.unwrap_or(0.0);
    ensure(acc == 1.0, format!("agent_critic accuracy {acc}"))?;
    let poisoned = mean_on(&agent, &suite.poisoned);
    ensure(poisoned < 1.0, format!("agent scored {poisoned} on the poisoned subset"))?;
    Ok(format!(
        "{} tasks: agent_critic {:.3}, agent {:.3} overall and {poisoned:.3} on {} poisoned",
        items.len(),
        acc,
        agent.aggregate.accuracy.unwrap_or(0.0),
        suite.poisoned.len()
    ))
}

fn single_program_degradation() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = write_suite(dir.path()).map_err(|e| e.to_string())?;
    let p = suite_pipeline(&suite);
    let items = load_dataset(&suite.choice_dataset, Some(&p.profile)).map_err(|e| e.to_string())?;
    let single = p.evaluate(&items, Mode::SingleProgram).map_err(|e| e.to_string())?;
    let agent = p.evaluate(&items, Mode::Agent).map_err(|e| e.to_string())?;
    let (s, a) = (single.aggregate.accuracy.unwrap_or(0.0), agent.aggregate.accuracy.unwrap_or(0.0));
    ensure(s < a, format!("single_program {s} is not below agent {a}"))?;
    let one_call = single.items.iter().all(|i| i.traces.len() == 1);
    ensure(one_call, "a single_program item produced more than one trace")?;
    Ok(format!("single_program {s:.3} < agent {a:.3}"))
}

fn vidcritic(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vidcritic"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn replay_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let out = vidcritic(d, &["suite", "s"]);
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let record = vidcritic(
        d,
        &[
            "--config", "s/config.toml", "--mode", "agent_critic", "--traces-dir", "traces",
            "--cassette", "record:run.cassette", "eval", "s/choice.jsonl", "--out", "report.json",
        ],
    );
    ensure(record.status.success(), String::from_utf8_lossy(&record.stderr).into_owned())?;
    let replay = vidcritic(d, &["replay", "report.json", "--traces-dir", "replayed"]);
    ensure(
        replay.status.code() == Some(0),
        format!("replay exited {:?}: {}", replay.status.code(), String::from_utf8_lossy(&replay.stderr)),
    )?;
    let mut files = 0;
    let report: RunReport = RunReport::load(d.join("report.json")).map_err(|e| e.to_string())?;
    for item in &report.items {
        for rel in item.traces.iter().map(String::as_str).chain(std::iter::once("")) {
            let rel = if rel.is_empty() { format!("agent_critic/{}/critic.json", item.task_id) } else { rel.to_string() };
            let a = std::fs::read(d.join("traces").join(&rel)).map_err(|e| format!("{rel}: {e}"))?;
            let b = std::fs::read(d.join("replayed").join(&rel)).map_err(|e| format!("{rel}: {e}"))?;
            ensure(a == b, format!("{rel} differs after replay"))?;
            files += 1;
        }
    }

    let cassette = std::fs::read_to_string(d.join("run.cassette")).map_err(|e| e.to_string())?;
    let tampered = cassette.replacen("retrieval_qa(question", "find_when(query", 1);
    ensure(tampered != cassette, "nothing to tamper with")?;
    std::fs::write(d.join("tampered.cassette"), tampered).map_err(|e| e.to_string())?;
    let bad = vidcritic(d, &["replay", "report.json", "--cassette", "replay:tampered.cassette"]);
    ensure(bad.status.code() == Some(3), format!("tampered replay exited {:?}", bad.status.code()))?;
    Ok(format!(
        "{} items, {files} trace and critic files byte-identical; tampered cassette exits 3",
        report.items.len()
    ))
}

fn ablation_enumeration() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = write_suite(dir.path()).map_err(|e| e.to_string())?;
    let p = suite_pipeline(&suite);
    let items = load_dataset(&suite.choice_dataset, Some(&p.profile)).map_err(|e| e.to_string())?;
    ensure(p.profile.pool.len() == 3, format!("pool has {} modules", p.profile.pool.len()))?;
    let ab = p.ablate(&items).map_err(|e| e.to_string())?;
    ensure(ab.subsets.len() == 6, format!("{} subsets", ab.subsets.len()))?;
    let mut seen: Vec<Vec<String>> = ab.subsets.iter().map(|s| s.modules.clone()).collect();
    seen.sort();
    seen.dedup();
    ensure(seen.len() == 6, "duplicate subsets")?;
    for s in &ab.subsets {
        ensure(
            ab.best_score >= s.aggregate.mean_score,
            format!("max {} below subset {} at {}", ab.best_score, s.label, s.aggregate.mean_score),
        )?;
    }
    Ok(format!("6 subsets of [{}], best {} at {:.3}", p.profile.pool.join(", "), ab.best, ab.best_score))
}

fn self_eval_rounds(confidences: &[&str], rounds: usize) -> Result<Vec<u8>, String> {
    let video = Arc::new(Video::from_fixture("se", VideoFixture::blank(Timestamp::from_secs(60))));
    let task = TaskQuery::multiple_choice("se", "Which?", vec!["a".into(), "b".into()], video.video_ref(), false)
        .map_err(|e| e.to_string())?;
    let mut script = Vec::new();
    for c in confidences {
        script.push("```\nfinish('Final Answer: (1)')\n```".to_string());
        script.push(c.to_string());
    }
    let client = ModelClient::new(Arc::new(ScriptedModel::new(script)));
    let registry = builtin_registry(&ToolBackend::Oracle).map_err(|e| e.to_string())?;
    let prompts = Prompts::default();
    let agent = Agent::new(&client, &registry, &prompts).with_settings(AgentSettings {
        self_eval_rounds: rounds,
        ..AgentSettings::default()
    });
    let subset = StrategySubset {
        label: StrategyLabel('A'),
        modules: vec!["retrieval_qa".into()],
        direct: false,
    };
    let trace = agent.run_self_eval(&task, &video, &subset).map_err(|e| e.to_string())?;
    Ok(trace.confidences.clone())
}

fn self_eval_contract() -> Result<String, String> {
    let early = self_eval_rounds(&["1", "2", "3", "1", "1"], 5)?;
    ensure(early == [1, 2, 3], format!("stopped after {early:?}"))?;
    let first = self_eval_rounds(&["3"], 5)?;
    ensure(first == [3], format!("stopped after {first:?}"))?;
    let never = self_eval_rounds(&["2", "1", "2", "2"], 4)?;
    ensure(never == [2, 1, 2, 2], format!("ran {never:?}"))?;
    Ok("stops at the first 3 (rounds 3 and 1), otherwise after max_rounds (4)".into())
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("DSL golden corpus", dsl_corpus),
        ("metric oracle", metric_oracle),
        ("window accounting", window_accounting),
        ("verdict parsing", verdict_parsing),
        ("oracle end-to-end suite", end_to_end_suite),
        ("single-program degradation", single_program_degradation),
        ("replay determinism", replay_determinism),
        ("ablation enumeration", ablation_enumeration),
        ("self-eval contract", self_eval_contract),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed in {:?}", checks.len() - failed, checks.len(), start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
