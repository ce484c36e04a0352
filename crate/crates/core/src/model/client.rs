use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::cassette::{Cassette, CassetteMode};
use super::request::{budget_frames, ModelRequest, DEFAULT_FRAME_BUDGET};
use super::ModelError;

/// Anything that turns a request into text.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError>;
}

/// Pops canned responses in order and keeps every request it saw.
#[derive(Default)]
pub struct ScriptedModel {
    queue: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<ModelRequest>>,
}

impl ScriptedModel {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().unwrap().push_back(response.into());
    }

    pub fn requests(&self) -> Vec<ModelRequest> {
        self.seen.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ModelBackend for ScriptedModel {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        self.seen.lock().unwrap().push(req.clone());
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| ModelError::Exhausted(req.tag.clone()))
    }
}

/// Scripted responses keyed by tag prefix, so concurrent episodes each
/// draw from their own queue. The longest matching prefix wins.
#[derive(Default)]
pub struct RoutedModel {
    routes: Mutex<Vec<(String, VecDeque<String>)>>,
}

impl RoutedModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route<I, S>(self, prefix: impl Into<String>, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.routes
            .lock()
            .unwrap()
            .push((prefix.into(), responses.into_iter().map(Into::into).collect()));
        self
    }

    pub fn remaining(&self) -> usize {
        self.routes.lock().unwrap().iter().map(|(_, q)| q.len()).sum()
    }
}

impl ModelBackend for RoutedModel {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let mut routes = self.routes.lock().unwrap();
        routes
            .iter_mut()
            .filter(|(p, _)| req.tag.starts_with(p.as_str()))
            .max_by_key(|(p, _)| p.len())
            .and_then(|(_, q)| q.pop_front())
            .ok_or_else(|| ModelError::Exhausted(req.tag.clone()))
    }
}

type Responder = dyn Fn(&ModelRequest) -> Result<String, ModelError> + Send + Sync;

/// Wraps a closure, for policies computed from the request.
pub struct FnModel(Box<Responder>);

impl FnModel {
    pub fn new(f: impl Fn(&ModelRequest) -> Result<String, ModelError> + Send + Sync + 'static) -> Self {
        Self(Box::new(f))
    }
}

impl ModelBackend for FnModel {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        (self.0)(req)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.limit {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.cv.notify_one();
    }
}

/// Spaces request starts at least `interval` apart.
struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self) {
        let delay = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let start = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(start + self.interval);
            start - now
        };
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}

/// The single entry point for model calls. Enforces the frame budget,
/// bounds concurrency, retries transient failures and records or replays
/// through an optional cassette.
pub struct ModelClient {
    backend: Option<Arc<dyn ModelBackend>>,
    frame_budget: usize,
    gate: Option<Gate>,
    rate: Option<RateLimiter>,
    retry: RetryPolicy,
    cassette: Option<Arc<Cassette>>,
    calls: AtomicUsize,
}

impl ModelClient {
    pub fn new(backend: Arc<dyn ModelBackend>) -> Self {
        Self {
            backend: Some(backend),
            frame_budget: DEFAULT_FRAME_BUDGET,
            gate: None,
            rate: None,
            retry: RetryPolicy::default(),
            cassette: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// A client that can only answer from a replay cassette.
    pub fn replay_only(cassette: Arc<Cassette>) -> Self {
        Self {
            backend: None,
            cassette: Some(cassette),
            ..Self::new(Arc::new(ScriptedModel::default()))
        }
    }

    pub fn with_frame_budget(mut self, budget: usize) -> Self {
        self.frame_budget = budget;
        self
    }

    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.gate = Some(Gate {
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            cv: Condvar::new(),
        });
        self
    }

    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.rate = Some(RateLimiter {
            interval,
            next: Mutex::new(None),
        });
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cassette(mut self, cassette: Arc<Cassette>) -> Self {
        self.cassette = Some(cassette);
        self
    }

    pub fn cassette(&self) -> Option<&Arc<Cassette>> {
        self.cassette.as_ref()
    }

    pub fn frame_budget(&self) -> usize {
        self.frame_budget
    }

    /// Requests that reached the backend or cassette.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let frames = budget_frames(&req.parts);
        if frames > self.frame_budget {
            return Err(ModelError::BudgetExceeded {
                frames,
                budget: self.frame_budget,
            });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(c) = &self.cassette {
            if c.mode() == CassetteMode::Replay {
                return c.replay(req);
            }
        }
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| ModelError::Config("no model backend configured".into()))?;
        let _slot = self.gate.as_ref().map(Gate::acquire);
        let mut attempt = 0;
        let response = loop {
            if let Some(r) = &self.rate {
                r.wait();
            }
            match backend.complete(req) {
                Err(ModelError::Transient(msg)) => {
                    attempt += 1;
                    if attempt >= self.retry.attempts {
                        return Err(ModelError::Transport(format!(
                            "giving up after {attempt} attempts: {msg}"
                        )));
                    }
                    tracing::warn!(tag = %req.tag, attempt, "transient model error: {msg}");
                    std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
                }
                other => break other?,
            }
        };
        if let Some(c) = &self.cassette {
            if c.mode() == CassetteMode::Record {
                c.record(req, &response);
            }
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Timestamp;
    use crate::fixtures::FrameRef;
    use crate::model::PromptPart;

    fn frames(n: u64) -> PromptPart {
        PromptPart::Frames(
            (0..n)
                .map(|i| FrameRef {
                    video: "v".into(),
                    index: i,
                    t: Timestamp::from_secs(i as u32),
                    image: None,
                })
                .collect(),
        )
    }

    #[test]
    fn scripted_identity() {
        let text = "```\nfinish(\"Final Answer: (2)\")\n```";
        let client = ModelClient::new(Arc::new(ScriptedModel::new([text])));
        assert_eq!(client.complete(&ModelRequest::text("t", "p")).unwrap(), text);
        assert!(matches!(
            client.complete(&ModelRequest::text("t", "p")),
            Err(ModelError::Exhausted(_))
        ));
    }

    #[test]
    fn budget_rejected_before_transport() {
        let model = Arc::new(ScriptedModel::new(["x"]));
        let client = ModelClient::new(model.clone());
        let err = client.complete(&ModelRequest::new("t", vec![frames(121)])).unwrap_err();
        assert!(matches!(err, ModelError::BudgetExceeded { frames: 121, budget: 120 }));
        assert!(model.requests().is_empty());
        assert!(client.complete(&ModelRequest::new("t", vec![frames(120)])).is_ok());
    }

    #[test]
    fn retries_transient_then_gives_up() {
        let n = Arc::new(AtomicUsize::new(0));
        let counter = n.clone();
        let flaky = FnModel::new(move |_| {
            if counter.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(ModelError::Transient("503".into()))
            } else {
                Ok("ok".into())
            }
        });
        let fast = RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        };
        let client = ModelClient::new(Arc::new(flaky)).with_retry(fast);
        assert_eq!(client.complete(&ModelRequest::text("t", "p")).unwrap(), "ok");
        let dead = ModelClient::new(Arc::new(FnModel::new(|_| Err(ModelError::Transient("down".into())))))
            .with_retry(fast);
        assert!(matches!(
            dead.complete(&ModelRequest::text("t", "p")),
            Err(ModelError::Transport(_))
        ));
    }

    #[test]
    fn record_replay_three_turns() {
        let cassette = Arc::new(Cassette::recorder(None));
        let live = ModelClient::new(Arc::new(ScriptedModel::new(["r1", "r2", "r3"])))
            .with_cassette(cassette.clone());
        let reqs: Vec<_> = (1..=3)
            .map(|i| ModelRequest::text(format!("ep/turn{i}"), format!("prompt {i}")))
            .collect();
        let first: Vec<_> = reqs.iter().map(|r| live.complete(r).unwrap()).collect();
        let replay = ModelClient::replay_only(Arc::new(Cassette::replay_entries(cassette.entries())));
        let second: Vec<_> = reqs.iter().map(|r| replay.complete(r).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn concurrency_cap_holds() {
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (a, p) = (active.clone(), peak.clone());
        let slow = FnModel::new(move |_| {
            let now = a.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            a.fetch_sub(1, Ordering::SeqCst);
            Ok(String::new())
        });
        let client = ModelClient::new(Arc::new(slow)).with_concurrency(2);
        std::thread::scope(|s| {
            for i in 0..8 {
                let c = &client;
                s.spawn(move || c.complete(&ModelRequest::text(format!("{i}"), "x")).unwrap());
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(client.call_count(), 8);
    }
}
