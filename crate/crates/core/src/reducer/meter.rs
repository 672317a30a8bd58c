use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// One-way cancellation signal shared between a reduction worker and its
/// observers.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

/// Search budget. Wall-clock budgets are not reproducible; node budgets are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    WallClock { millis: u64 },
    Nodes { count: u64 },
}

impl Budget {
    pub fn wall_clock(d: Duration) -> Self {
        Budget::WallClock {
            millis: d.as_millis() as u64,
        }
    }

    pub fn nodes(count: u64) -> Self {
        Budget::Nodes { count }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Budget::Nodes { .. })
    }

    /// Splits off `1/parts` of this budget.
    pub fn share(&self, parts: u64) -> Budget {
        let parts = parts.max(1);
        match *self {
            Budget::WallClock { millis } => Budget::WallClock { millis: millis / parts },
            Budget::Nodes { count } => Budget::Nodes { count: count / parts },
        }
    }
}

pub(crate) enum Stop {
    Budget,
    Cancelled,
}

/// Tracks spent nodes against a budget and a cancellation token.
pub(crate) struct Meter {
    start: Instant,
    deadline: Option<Instant>,
    node_limit: Option<u64>,
    nodes: u64,
    cancel: CancelToken,
    stopped: Option<Stop>,
}

impl Meter {
    pub fn new(budget: Budget, cancel: CancelToken) -> Self {
        let start = Instant::now();
        let (deadline, node_limit) = match budget {
            Budget::WallClock { millis } => (Some(start + Duration::from_millis(millis)), None),
            Budget::Nodes { count } => (None, Some(count)),
        };
        Meter {
            start,
            deadline,
            node_limit,
            nodes: 0,
            cancel,
            stopped: None,
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn nodes(&self) -> u64 {
        self.nodes
    }

    /// Charges `n` nodes; returns false once the budget is gone or the
    /// session was cancelled.
    pub fn charge(&mut self, n: u64) -> bool {
        if self.stopped.is_some() {
            return false;
        }
        let before = self.nodes;
        self.nodes += n;
        if let Some(limit) = self.node_limit {
            if self.nodes >= limit {
                self.stopped = Some(Stop::Budget);
                return false;
            }
        }
        // clock and flag are polled every 256 nodes
        if before >> 8 != self.nodes >> 8 || n > 1 {
            if self.cancel.is_cancelled() {
                self.stopped = Some(Stop::Cancelled);
                return false;
            }
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.stopped = Some(Stop::Budget);
                    return false;
                }
            }
        }
        true
    }

    pub fn is_stopped(&mut self) -> bool {
        self.stopped.is_some() || self.poll()
    }

    fn poll(&mut self) -> bool {
        if self.cancel.is_cancelled() {
            self.stopped = Some(Stop::Cancelled);
        } else if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.stopped = Some(Stop::Budget);
        }
        self.stopped.is_some()
    }

    pub fn stop_reason(&self) -> Option<&Stop> {
        self.stopped.as_ref()
    }
}
