use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use vidcritic::dsl::{execute_program, parse_program, Environment, Value};
use vidcritic::fixtures::{Video, VideoFixture};
use vidcritic::model::{budget_frames, FnModel, ModelClient, ModelRequest};
use vidcritic::prompts::Prompts;
use vidcritic::toolkit::{EpisodeContext, StrategyLabel, StrategySubset, ToolArgs, ToolRegistry};
use vidcritic::tools::{builtin_registry, ToolBackend, ToolSettings, NOT_VISIBLE, NO_RANGES, NO_SPEECH};
use vidcritic::{FinalAnswer, TaskQuery, VideoSegment};

fn fixture_json() -> &'static str {
    r#"{
      "duration": "40:50",
      "fps": 1,
      "events": [
        {"start": "02:30", "end": "02:55", "label": "person jumping on the trampoline", "justification": "A child bounces on a trampoline."},
        {"start": "00:40", "end": "00:50", "label": "dog runs in the yard", "justification": "A dog crosses the lawn."},
        {"start": "10:00", "end": "10:20", "label": "trampoline is folded away", "justification": "Adults fold the trampoline."}
      ],
      "asr": [
        {"t": "01:23", "text": "inhale during the descent"},
        {"t": "02:00", "text": "keep your back straight"}
      ],
      "qa_facts": [
        {"start": "12:10", "end": "12:20", "keywords": ["suit", "color"], "answer": "The host is wearing a navy suit."}
      ]
    }"#
}

fn video() -> Arc<Video> {
    Arc::new(Video::from_fixture("v1", VideoFixture::from_json_str(fixture_json()).unwrap()))
}

fn mcq(video: &Video, question: &str, options: &[&str]) -> Arc<TaskQuery> {
    Arc::new(
        TaskQuery::multiple_choice(
            "t1",
            question,
            options.iter().map(|s| s.to_string()).collect(),
            video.video_ref(),
            true,
        )
        .unwrap(),
    )
}

fn rtl(video: &Video, question: &str) -> Arc<TaskQuery> {
    Arc::new(TaskQuery::temporal_range("t2", question, video.video_ref(), false).unwrap())
}

fn all_visual() -> StrategySubset {
    StrategySubset {
        label: StrategyLabel('A'),
        modules: ["get_segment", "find_when", "asr_understanding", "retrieval_qa"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        direct: false,
    }
}

fn run(registry: &ToolRegistry, task: Arc<TaskQuery>, video: Arc<Video>, src: &str) -> vidcritic::dsl::StepResult {
    let ctx = EpisodeContext::new(task, video, false, "t/A/turn1");
    let host = registry.activate(&all_visual(), ctx).unwrap();
    let mut env = Environment::new();
    execute_program(&parse_program(src).unwrap(), &mut env, &host)
}

#[test]
fn think_echoes() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let out = run(&r, mcq(&v, "q", &["a"]), v.clone(), "think(\"line one\\nline two\")");
    assert_eq!(out.rendered, "line one\nline two");
    let out = run(&r, mcq(&v, "q", &["a"]), v, "think(\"\")");
    assert_eq!(out.rendered, "");
}

#[test]
fn get_segment_clamps_and_rejects() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let t = mcq(&v, "q", &["a"]);
    let out = run(&r, t.clone(), v.clone(), "s = get_segment(\"12:10\", \"12:20\")");
    assert_eq!(out.values["s"], Value::Segment(VideoSegment::from_secs(730, 740).unwrap()));
    let out = run(&r, t.clone(), v.clone(), "get_segment(\"00:00\", \"40:50\")");
    assert_eq!(out.rendered, "['00:00', '40:50']");
    let out = run(&r, t.clone(), v.clone(), "get_segment(\"40:00\", \"50:00\")");
    assert_eq!(out.rendered, "['40:00', '40:50']");
    let out = run(&r, t.clone(), v.clone(), "get_segment(\"45:00\", \"50:00\")");
    assert!(out.error.unwrap().contains("after the video ends"));
    let out = run(&r, t, v, "get_segment(\"00:20\", \"00:10\")");
    assert!(out.error.is_some());
}

#[test]
fn oracle_find_when() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let t = rtl(&v, "When is the trampoline first used?");
    let out = run(&r, t.clone(), v.clone(), "find_when(\"trampoline first used\")");
    assert_eq!(
        out.rendered,
        "[\"02:30\", \"02:55\"]: A child bounces on a trampoline.\n[\"10:00\", \"10:20\"]: Adults fold the trampoline."
    );
    let out = run(&r, t.clone(), v.clone(), "find_when(\"a cat sleeping\")");
    assert_eq!(out.rendered, NO_RANGES);
    let out = run(
        &r,
        t.clone(),
        v.clone(),
        "s = get_segment(\"00:00\", \"05:00\")\nfind_when(\"trampoline\", video_segment=s)",
    );
    assert_eq!(out.rendered, "[\"02:30\", \"02:55\"]: A child bounces on a trampoline.");

    let ctx = EpisodeContext::new(t, v, true, "t/B");
    let direct = r
        .call_direct("find_when", ToolArgs::new().with("query", Value::Str("trampoline".into())), &ctx)
        .unwrap();
    let text = direct.value.as_str().unwrap();
    assert!(text.ends_with("Final Answer: [02:30, 02:55], [10:00, 10:20]"), "{text}");
}

#[test]
fn oracle_retrieval_locality() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let t = mcq(&v, "What color is the host's suit?", &["black", "navy", "grey"]);
    let out = run(
        &r,
        t.clone(),
        v.clone(),
        "s = get_segment(\"12:10\", \"12:20\")\nretrieval_qa(\"What color is the suit?\", video_segment=s)",
    );
    assert_eq!(out.rendered, "The host is wearing a navy suit.");
    let out = run(
        &r,
        t.clone(),
        v.clone(),
        "s = get_segment(\"00:00\", \"01:00\")\nretrieval_qa(\"What color is the suit?\", video_segment=s)",
    );
    assert_eq!(out.rendered, NOT_VISIBLE);
    let out = run(
        &r,
        t,
        v,
        "retrieval_qa(\"What color is the suit?\", answer_options=[\"black\", \"navy\", \"grey\"])",
    );
    assert_eq!(out.rendered, "The host is wearing a navy suit.\nFinal Answer: (2)");
}

#[test]
fn oracle_asr() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let t = mcq(&v, "q", &["a"]);
    let out = run(&r, t.clone(), v.clone(), "asr_understanding(\"breathing during the squat\")");
    assert_eq!(out.rendered, "[01:23] inhale during the descent");
    let silent = Arc::new(Video::from_fixture("s", VideoFixture::blank(v.duration())));
    let out = run(&r, mcq(&silent, "q", &["a"]), silent, "asr_understanding(\"anything\")");
    assert_eq!(out.rendered, NO_SPEECH);
}

#[test]
fn finish_parses_by_kind() {
    let r = builtin_registry(&ToolBackend::Oracle).unwrap();
    let v = video();
    let out = run(&r, mcq(&v, "q", &["a", "b"]), v.clone(), "finish(\"because. Final Answer: (1)\")");
    assert!(out.terminal);
    assert_eq!(out.finish.unwrap().answer, FinalAnswer::Choice(1));
    let out = run(&r, rtl(&v, "q"), v.clone(), "finish(\"Final Answer: [00:30, 01:15]\")");
    assert_eq!(
        out.finish.unwrap().answer,
        FinalAnswer::Ranges(vec![VideoSegment::from_secs(30, 75).unwrap()])
    );
    let out = run(&r, mcq(&v, "q", &["a"]), v, "finish(\"I cannot tell\")");
    assert!(out.terminal && out.finish.unwrap().answer.is_unparsed());
}

/// Counts requests by kind and records the largest frame load seen.
struct Counter {
    windows: AtomicUsize,
    selects: AtomicUsize,
    other: AtomicUsize,
    max_frames: AtomicUsize,
    tags: Mutex<Vec<String>>,
}

fn counting_client(select_reply: &'static str) -> (Arc<Counter>, Arc<ModelClient>) {
    let c = Arc::new(Counter {
        windows: AtomicUsize::new(0),
        selects: AtomicUsize::new(0),
        other: AtomicUsize::new(0),
        max_frames: AtomicUsize::new(0),
        tags: Mutex::new(Vec::new()),
    });
    let c2 = c.clone();
    let model = FnModel::new(move |req: &ModelRequest| {
        c2.max_frames.fetch_max(budget_frames(&req.parts), Ordering::SeqCst);
        c2.tags.lock().unwrap().push(req.tag.clone());
        let tail = req.tag.rsplit('/').next().unwrap();
        if tail.starts_with('w') {
            c2.windows.fetch_add(1, Ordering::SeqCst);
            Ok("NONE".into())
        } else if tail.starts_with("select") {
            c2.selects.fetch_add(1, Ordering::SeqCst);
            Ok(select_reply.into())
        } else {
            c2.other.fetch_add(1, Ordering::SeqCst);
            Ok("Final Answer: (1)".into())
        }
    });
    (c, Arc::new(ModelClient::new(Arc::new(model))))
}

fn blank_video(frames: u32) -> Arc<Video> {
    Arc::new(Video::from_fixture(
        format!("blank{frames}"),
        VideoFixture::blank(vidcritic::Timestamp::from_secs(frames)),
    ))
}

#[test]
fn window_accounting_and_budget() {
    for n in [64u32, 65, 2450, 7200] {
        for parallelism in [1, 4] {
            let (count, client) = counting_client("0\n1\n2");
            let settings = ToolSettings {
                window_parallelism: parallelism,
                ..ToolSettings::default()
            };
            let backend = ToolBackend::model(client, Arc::new(Prompts::default()), settings);
            let r = builtin_registry(&backend).unwrap();
            let v = blank_video(n);
            let task = mcq(&v, "What happens?", &["a", "b"]);
            let ctx = EpisodeContext::new(task, v.clone(), false, "t/A/turn1");
            r.call_direct("find_when", ToolArgs::new().with("query", Value::Str("x".into())), &ctx)
                .unwrap();
            r.call_direct("retrieval_qa", ToolArgs::new().with("question", Value::Str("x".into())), &ctx)
                .unwrap();
            let n = n as usize;
            assert_eq!(count.windows.load(Ordering::SeqCst), n.div_ceil(100), "find_when on {n}");
            assert_eq!(count.selects.load(Ordering::SeqCst), n.div_ceil(64), "retrieval phase 1 on {n}");
            assert_eq!(count.other.load(Ordering::SeqCst), 1);
            assert!(count.max_frames.load(Ordering::SeqCst) <= 120);
        }
    }
}

#[test]
fn retrieval_context_assembly() {
    let (_, client) = counting_client("");
    let seen: Arc<Mutex<Vec<ModelRequest>>> = Arc::default();
    let seen2 = seen.clone();
    let inner = client.clone();
    let spy = FnModel::new(move |req: &ModelRequest| {
        seen2.lock().unwrap().push(req.clone());
        inner.complete(req)
    });
    let client = Arc::new(ModelClient::new(Arc::new(spy)));
    let backend = ToolBackend::model(client, Arc::new(Prompts::default()), ToolSettings::default());
    let r = builtin_registry(&backend).unwrap();
    let v = blank_video(2450);
    let task = mcq(&v, "q", &["a", "b"]);
    let ctx = EpisodeContext::new(task, v.clone(), false, "t/A/turn1");
    let seg = VideoSegment::from_secs(600, 800).unwrap();
    let out = r
        .call_direct(
            "retrieval_qa",
            ToolArgs::new()
                .with("question", Value::Str("x".into()))
                .with("video_segment", Value::Segment(seg)),
            &ctx,
        )
        .unwrap();
    // No frame was reported relevant, so the segment is sampled uniformly.
    assert_eq!(out.notes.len(), 1);
    let reqs = seen.lock().unwrap();
    let answer = reqs.last().unwrap();
    let frames: Vec<u64> = answer.frames().map(|f| f.index).collect();
    assert_eq!(frames.len(), 120);
    let (retrieved, context) = frames.split_at(64);
    assert!(retrieved.iter().all(|&i| (600..800).contains(&i)));
    assert!(context.iter().all(|&i| !(600..800).contains(&i)));
    assert_eq!(context.first(), Some(&0));
    assert_eq!(context.last(), Some(&2449));
}

#[test]
fn retrieval_caps_earliest_first() {
    // Every window reports all its frames; the cap keeps the first 64.
    let all: &'static str = Box::leak((0..7200).map(|i| format!("{i}\n")).collect::<String>().into_boxed_str());
    let (_, client) = counting_client(all);
    let seen: Arc<Mutex<Vec<ModelRequest>>> = Arc::default();
    let seen2 = seen.clone();
    let spy = FnModel::new(move |req: &ModelRequest| {
        seen2.lock().unwrap().push(req.clone());
        client.complete(req)
    });
    let backend = ToolBackend::model(
        Arc::new(ModelClient::new(Arc::new(spy))),
        Arc::new(Prompts::default()),
        ToolSettings::default(),
    );
    let r = builtin_registry(&backend).unwrap();
    let v = blank_video(300);
    let ctx = EpisodeContext::new(mcq(&v, "q", &["a"]), v.clone(), false, "t");
    let out = r
        .call_direct("retrieval_qa", ToolArgs::new().with("question", Value::Str("x".into())), &ctx)
        .unwrap();
    assert!(out.notes.is_empty());
    let reqs = seen.lock().unwrap();
    let frames: Vec<u64> = reqs.last().unwrap().frames().map(|f| f.index).collect();
    assert_eq!(frames, (0..64).collect::<Vec<u64>>());
}

#[test]
fn asr_model_chunks_then_consolidates() {
    let lines: Vec<String> = (0..50)
        .map(|i| format!("{{\"t\": \"00:{:02}\", \"text\": \"word number {i}\"}}", i))
        .collect();
    let json = format!("{{\"duration\": \"01:00\", \"fps\": 1, \"asr\": [{}]}}", lines.join(","));
    let v = Arc::new(Video::from_fixture("a", VideoFixture::from_json_str(&json).unwrap()));
    let tags: Arc<Mutex<Vec<String>>> = Arc::default();
    let t2 = tags.clone();
    let model = FnModel::new(move |req: &ModelRequest| {
        t2.lock().unwrap().push(req.tag.clone());
        Ok(format!("reply to {}", req.tag))
    });
    let settings = ToolSettings {
        asr_chunk_chars: 200,
        ..ToolSettings::default()
    };
    let backend = ToolBackend::model(
        Arc::new(ModelClient::new(Arc::new(model))),
        Arc::new(Prompts::default()),
        settings,
    );
    let r = builtin_registry(&backend).unwrap();
    let ctx = EpisodeContext::new(mcq(&v, "q", &["a"]), v.clone(), false, "t");
    let out = r
        .call_direct("asr_understanding", ToolArgs::new().with("question", Value::Str("x".into())), &ctx)
        .unwrap();
    let tags = tags.lock().unwrap();
    assert!(tags.len() > 2);
    assert!(tags.last().unwrap().ends_with("/consolidate"));
    assert!(out.value.as_str().unwrap().ends_with("/consolidate"));
}
