use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use tokio::sync::watch;
use trimcast_core::reducer::{reduce_observed, Milestone};
use trimcast_core::{CancelToken, Instance, ReduceConfig, Solution, TerminalReason};

use crate::api::{Event, Outcome, Progress, Snapshot, SessionState};

const TRACE_TAIL: usize = 20;

pub(crate) struct Session {
    pub id: String,
    pub instance: Instance,
    pub initial: Solution,
    pub config: ReduceConfig,
    pub ml_prediction: Option<f64>,
    pub naive_prediction: Option<f64>,
    cancel: CancelToken,
    inner: Mutex<Inner>,
    /// Bumped after every change to `inner`; stream readers wait on it.
    version: watch::Sender<u64>,
}

pub(crate) struct Inner {
    pub state: SessionState,
    pub best: Solution,
    pub progress: Vec<Progress>,
    pub terminal_at: Option<Instant>,
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Refusal {
    AlreadyTerminal(SessionState),
}

impl Session {
    pub fn new(
        id: String,
        instance: Instance,
        initial: Solution,
        config: ReduceConfig,
        ml_prediction: Option<f64>,
        naive_prediction: Option<f64>,
    ) -> Arc<Self> {
        let first = Progress {
            elapsed_ms: 0,
            pattern_count: initial.pattern_count(),
        };
        Arc::new(Session {
            id,
            instance,
            config,
            ml_prediction,
            naive_prediction,
            cancel: CancelToken::new(),
            inner: Mutex::new(Inner {
                state: SessionState::Running,
                best: initial.clone(),
                progress: vec![first],
                terminal_at: None,
            }),
            initial,
            version: watch::channel(0).0,
        })
    }

    pub fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.version.subscribe()
    }

    fn bump(&self) {
        self.version.send_modify(|v| *v += 1);
    }

    /// Runs the reduction on a dedicated thread.
    pub fn start(self: &Arc<Self>) {
        let me = Arc::clone(self);
        std::thread::Builder::new()
            .name(format!("reduce-{}", self.id))
            .spawn(move || me.work())
            .expect("spawn reduction worker");
    }

    fn work(&self) {
        let mut observer = |s: &Solution, m: &Milestone| {
            let mut inner = self.lock();
            if inner.state.is_terminal() {
                return;
            }
            inner.best = s.clone();
            inner.progress.push(Progress {
                elapsed_ms: m.elapsed_ms,
                pattern_count: m.pattern_count,
            });
            drop(inner);
            self.bump();
        };
        let result = reduce_observed(&self.initial, &self.instance, &self.config, &self.cancel, &mut observer);
        let mut inner = self.lock();
        match result {
            Ok((solution, trace)) => {
                if !inner.state.is_terminal() {
                    inner.best = solution;
                    inner.state = match trace.reason {
                        TerminalReason::Cancelled => SessionState::Cancelled,
                        _ => SessionState::Finished,
                    };
                    inner.terminal_at = Some(Instant::now());
                }
            }
            Err(e) => {
                log::error!("session {}: reduction failed: {e}", self.id);
                if !inner.state.is_terminal() {
                    inner.state = SessionState::Finished;
                    inner.terminal_at = Some(Instant::now());
                }
            }
        }
        drop(inner);
        self.bump();
    }

    fn finish(&self, to: SessionState, allowed: &[SessionState]) -> Result<Outcome, Refusal> {
        let mut inner = self.lock();
        if inner.state != to && !allowed.contains(&inner.state) {
            return Err(Refusal::AlreadyTerminal(inner.state));
        }
        if inner.state != to {
            inner.state = to;
            inner.terminal_at = Some(Instant::now());
        }
        let outcome = Outcome {
            id: self.id.clone(),
            state: to,
            final_count: inner.best.pattern_count(),
            solution: inner.best.clone(),
        };
        drop(inner);
        self.cancel.cancel();
        self.bump();
        Ok(outcome)
    }

    /// Stops the worker and returns the best solution so far. Only valid
    /// while running.
    pub fn cancel(&self) -> Result<Outcome, Refusal> {
        let inner = self.lock();
        if inner.state.is_terminal() {
            return Err(Refusal::AlreadyTerminal(inner.state));
        }
        drop(inner);
        self.finish(SessionState::Cancelled, &[SessionState::Running])
    }

    /// Marks the current best as the answer. Valid while running or after
    /// the search finished; repeating it returns the same solution.
    pub fn accept(&self) -> Result<Outcome, Refusal> {
        self.finish(SessionState::Accepted, &[SessionState::Running, SessionState::Finished])
    }

    /// Events from index `from` on; the terminal line is included once the
    /// session has ended.
    pub fn events_since(&self, from: usize) -> (Vec<Event>, bool) {
        let inner = self.lock();
        let mut out: Vec<Event> = inner.progress[from.min(inner.progress.len())..]
            .iter()
            .map(|p| Event::Progress {
                elapsed_ms: p.elapsed_ms,
                pattern_count: p.pattern_count,
            })
            .collect();
        let done = inner.state.is_terminal();
        if done {
            out.push(Event::Terminal {
                state: inner.state,
                final_count: inner.best.pattern_count(),
            });
        }
        (out, done)
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.lock();
        let tail_from = inner.progress.len().saturating_sub(TRACE_TAIL);
        Snapshot {
            id: self.id.clone(),
            instance_id: self.instance.id.clone(),
            state: inner.state,
            budget: self.config.budget,
            initial_count: self.initial.pattern_count(),
            current_count: inner.best.pattern_count(),
            final_count: inner.state.is_terminal().then(|| inner.best.pattern_count()),
            ml_prediction: self.ml_prediction,
            naive_prediction: self.naive_prediction,
            event_count: inner.progress.len(),
            trace_tail: inner.progress[tail_from..].to_vec(),
        }
    }

    pub fn is_running(&self) -> bool {
        !self.lock().state.is_terminal()
    }

    pub fn terminal_at(&self) -> Option<Instant> {
        self.lock().terminal_at
    }
}
