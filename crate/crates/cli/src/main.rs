use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use vidcritic::agent::Trace;
use vidcritic::eval::suite::write_suite;
use vidcritic::eval::{load_dataset, parse_cassette_arg, EvalError, Mode, Pipeline, RunConfig, RunReport};
use vidcritic::fixtures::Video;
use vidcritic::model::{Cassette, CassetteMode};
use vidcritic::TaskQuery;

#[derive(Parser)]
#[command(name = "vidcritic", version, about = "Answer questions about videos with tool-using agents and a critic")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Where episode traces are written, one file per task per strategy.
    #[arg(long, global = true, value_name = "DIR")]
    traces_dir: Option<PathBuf>,
    /// direct, single_program, agent, agent_critic or self_eval.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// visual_mcq, asr_mcq, temporal_range, or one defined in the config.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Agent step budget per episode.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Tasks evaluated at once.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// Record model calls to, or replay them from, a cassette file.
    #[arg(long, global = true, value_name = "record:PATH|replay:PATH")]
    cassette: Option<String>,
    /// More logging on stderr; repeat for debug output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question and print the traces.
    Run(RunArgs),
    /// Evaluate a JSON-lines dataset and write a report.
    Eval(EvalArgs),
    /// Agent mode under every fixed module subset of the profile pool.
    Ablate(EvalArgs),
    /// Re-run a recorded evaluation from its cassette and check that traces
    /// and report come out byte-identical.
    Replay(ReplayArgs),
    /// Write the synthetic check suite: fixtures, datasets, critic verdicts
    /// and a config that uses them.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct SuiteArgs {
    dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Fixture file or frames directory.
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    question: String,
    /// An answer option; repeat for each. Without options the task asks
    /// for time ranges.
    #[arg(long = "option")]
    options: Vec<String>,
    #[arg(long, default_value = "task")]
    id: String,
    #[arg(long)]
    allow_asr: bool,
    /// Print the traces as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    dataset: PathBuf,
    /// Report file.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Report written by the recorded run.
    report: PathBuf,
    /// Dataset to replay; defaults to the one the report names.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Traces of the recorded run; defaults to the directory the report names.
    #[arg(long, value_name = "DIR")]
    expect_traces: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    Divergence(String),
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn build_config(g: &Global) -> Result<RunConfig, Failure> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &g.traces_dir {
        c.traces_dir = Some(d.clone());
    }
    if let Some(m) = g.mode {
        c.mode = m;
    }
    if let Some(p) = &g.profile {
        c.profile = p.clone();
    }
    if let Some(b) = g.budget {
        if b == 0 {
            return Err(Failure::Usage("--budget must be at least 1".into()));
        }
        c.agent.step_budget = b;
    }
    if let Some(n) = g.concurrency {
        c.concurrency = n.max(1);
    }
    if let Some(arg) = &g.cassette {
        parse_cassette_arg(arg).map_err(|e| Failure::Usage(e.to_string()))?;
        c.cassette = Some(arg.clone());
    }
    Ok(c)
}

fn save_cassette(p: &Pipeline) -> Result<(), Failure> {
    if let Some(c) = p.client.cassette() {
        c.save().map_err(|e| Failure::Data(format!("cannot write cassette: {e}")))?;
    }
    Ok(())
}

fn cmd_run(g: &Global, args: &RunArgs) -> Result<(), Failure> {
    let config = build_config(g)?;
    let mode = config.mode;
    let p = Pipeline::from_config(config)?;
    let video = Arc::new(Video::open(&args.video).map_err(|e| Failure::Data(e.to_string()))?);
    let task = if args.options.is_empty() {
        TaskQuery::temporal_range(&args.id, &args.question, video.video_ref(), args.allow_asr)
    } else {
        TaskQuery::multiple_choice(&args.id, &args.question, args.options.clone(), video.video_ref(), args.allow_asr)
    }
    .map_err(|e| Failure::Data(e.to_string()))?;
    let outcome = p.run_task(&task, &video, mode, None);
    p.persist(mode.as_str(), &task.id, &outcome)?;
    save_cassette(&p)?;
    if args.json {
        let out = serde_json::json!({
            "answer": outcome.answer,
            "strategy": outcome.strategy,
            "traces": outcome.traces,
            "judgement": outcome.judgement,
            "error": outcome.error,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
        return Ok(());
    }
    for t in &outcome.traces {
        println!("== {} [{:?}] ==", t.subset().heading(), t.stop_reason);
        print!("{}", t.transcript());
        println!("Answer: {}\n", t.answer().render());
    }
    if let Some(j) = &outcome.judgement {
        println!("== Critic ==\n{}", j.verdict.critique);
        let winners: Vec<String> = j.verdict.winners.iter().map(ToString::to_string).collect();
        println!("Winning Strategies: {}\n", if winners.is_empty() { "none".into() } else { winners.join(", ") });
    }
    if let Some(e) = &outcome.error {
        eprintln!("warning: {e}");
    }
    let label = outcome.strategy.map(|l| format!(" (strategy {l})")).unwrap_or_default();
    println!("Final answer: {}{label}", outcome.answer.render());
    Ok(())
}

fn summary(r: &RunReport) -> String {
    let a = &r.aggregate;
    let mut parts = vec![format!("{} on {} items", r.mode, a.items)];
    if let Some(acc) = a.accuracy {
        parts.push(format!("accuracy {acc:.3}"));
    }
    if let Some(m) = a.miou {
        parts.push(format!("mIOU {m:.3}"));
    }
    if a.failures > 0 {
        parts.push(format!("{} failed", a.failures));
    }
    parts.join(", ")
}

fn cmd_eval(g: &Global, args: &EvalArgs) -> Result<(), Failure> {
    let config = build_config(g)?;
    let mode = config.mode;
    let p = Pipeline::from_config(config)?;
    let items = load_dataset(&args.dataset, Some(&p.profile))?;
    let mut report = p.evaluate(&items, mode)?;
    report.runtime.dataset = Some(args.dataset.display().to_string());
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    report.write(&out)?;
    save_cassette(&p)?;
    println!("{}", summary(&report));
    println!("report: {}", out.display());
    Ok(())
}

fn cmd_ablate(g: &Global, args: &EvalArgs) -> Result<(), Failure> {
    let p = Pipeline::from_config(build_config(g)?)?;
    let items = load_dataset(&args.dataset, Some(&p.profile))?;
    let report = p.ablate(&items)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("ablation.json"));
    std::fs::write(&out, report.to_json()).map_err(|e| io_failure(&out, e))?;
    save_cassette(&p)?;
    for s in &report.subsets {
        println!("{}  {:.3}  {}", s.label, s.aggregate.mean_score, s.modules.join(", "));
    }
    println!("best: {} {:.3} ({})", report.best, report.best_score, report.validation);
    println!("report: {}", out.display());
    Ok(())
}

/// First step at which two traces differ, counting from 1.
fn first_step_difference(a: &Trace, b: &Trace) -> String {
    let n = a.steps.len().max(b.steps.len());
    match (0..n).find(|&i| a.steps.get(i) != b.steps.get(i)) {
        Some(i) => format!("step {}", i + 1),
        None => "its final answer".to_string(),
    }
}

fn cmd_replay(g: &Global, args: &ReplayArgs) -> Result<(), Failure> {
    let recorded = RunReport::load(&args.report)?;
    let mut config: RunConfig = serde_json::from_value(recorded.config.clone())
        .map_err(|e| Failure::Data(format!("{}: bad config snapshot: {e}", args.report.display())))?;
    config.mode = recorded.mode;
    let cassette = g
        .cassette
        .clone()
        .or_else(|| recorded.runtime.cassette.as_ref().map(|c| c.replacen("record:", "replay:", 1)))
        .ok_or_else(|| Failure::Usage("replay needs --cassette replay:PATH".into()))?;
    let (mode, _) = parse_cassette_arg(&cassette).map_err(|e| Failure::Usage(e.to_string()))?;
    if mode != CassetteMode::Replay {
        return Err(Failure::Usage("replay needs --cassette replay:PATH".into()));
    }
    config.cassette = Some(cassette);
    let scratch = tempfile::tempdir().map_err(|e| Failure::Data(e.to_string()))?;
    let new_traces = g.traces_dir.clone().unwrap_or_else(|| scratch.path().to_path_buf());
    config.traces_dir = Some(new_traces.clone());
    let dataset = args
        .dataset
        .clone()
        .or_else(|| recorded.runtime.dataset.as_ref().map(PathBuf::from))
        .ok_or_else(|| Failure::Usage("the report names no dataset; pass --dataset".into()))?;

    let p = Pipeline::from_config(config)?;
    let items = load_dataset(&dataset, Some(&p.profile))?;
    let replayed = p.evaluate(&items, recorded.mode)?;

    let cassette: &Arc<Cassette> = p.client.cassette().expect("replay has a cassette");
    let mut divergences = cassette.divergences();
    divergences.sort_by(|a, b| a.tag().cmp(b.tag()));
    if let Some(d) = divergences.first() {
        return Err(Failure::Divergence(format!("replay diverged at `{}`: {d}", d.tag())));
    }
    if cassette.unconsumed() > 0 {
        return Err(Failure::Divergence(format!(
            "{} recorded responses were never requested",
            cassette.unconsumed()
        )));
    }
    if replayed.canonical_json() != recorded.canonical_json() {
        let item = recorded
            .items
            .iter()
            .zip(&replayed.items)
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.task_id.clone())
            .unwrap_or_else(|| "the report header".into());
        return Err(Failure::Divergence(format!("report differs from the recording at {item}")));
    }
    let expected_dir = args
        .expect_traces
        .clone()
        .or_else(|| recorded.runtime.traces_dir.as_ref().map(PathBuf::from));
    let mut compared = 0;
    if let Some(dir) = expected_dir {
        for item in &recorded.items {
            for rel in &item.traces {
                let old_path = dir.join(rel);
                let old = std::fs::read(&old_path).map_err(|e| io_failure(&old_path, e))?;
                let new_path = new_traces.join(rel);
                let new = std::fs::read(&new_path).map_err(|e| io_failure(&new_path, e))?;
                if old != new {
                    let at = match (serde_json::from_slice::<Trace>(&old), serde_json::from_slice::<Trace>(&new)) {
                        (Ok(a), Ok(b)) => first_step_difference(&a, &b),
                        _ => "an unreadable trace".into(),
                    };
                    return Err(Failure::Divergence(format!("trace {rel} differs from the recording at {at}")));
                }
                compared += 1;
            }
        }
    }
    println!(
        "replay matches: {} items, report identical, {compared} traces byte-identical",
        replayed.items.len()
    );
    Ok(())
}

fn cmd_suite(args: &SuiteArgs) -> Result<(), Failure> {
    let suite = write_suite(&args.dir).map_err(|e| io_failure(&args.dir, e))?;
    let config = args.dir.join("config.toml");
    std::fs::write(&config, "profile = \"visual_mcq\"\n\n[model]\nverdicts = \"verdicts.json\"\n")
        .map_err(|e| io_failure(&config, e))?;
    println!("config: {}", config.display());
    println!("choice dataset: {} ({} items)", suite.choice_dataset.display(), suite.locality.len() + suite.poisoned.len());
    println!("range dataset: {} ({} items, --profile temporal_range)", suite.range_dataset.display(), suite.ranges.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => tracing_subscriber::filter::LevelFilter::WARN,
        1 => tracing_subscriber::filter::LevelFilter::INFO,
        _ => tracing_subscriber::filter::LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run(a) => cmd_run(g, a),
        Command::Eval(a) => cmd_eval(g, a),
        Command::Ablate(a) => cmd_ablate(g, a),
        Command::Replay(a) => cmd_replay(g, a),
        Command::Suite(a) => cmd_suite(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nRun `vidcritic --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Divergence(m)) => {
            eprintln!("replay divergence: {m}");
            ExitCode::from(3)
        }
    }
}
