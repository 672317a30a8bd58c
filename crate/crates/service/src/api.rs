//! Request and response bodies. `docs/api.md` describes the same shapes.

use serde::{Deserialize, Serialize};
use trimcast_core::pipeline::DatasetRecord;
use trimcast_core::{Budget, Instance, Solution};

/// Body of `POST /sessions`. Either `record` or `instance` must be given;
/// without `solution`, the initial solution is computed by first-fit
/// decreasing with pair repacking.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Instance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Solution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<DatasetRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub initial_count: usize,
    pub ml_prediction: Option<f64>,
    pub naive_prediction: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Running,
    Accepted,
    Cancelled,
    Finished,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        self != SessionState::Running
    }
}

/// One line of the event stream: a progress line while running, then a
/// single terminal line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Event {
    Progress { elapsed_ms: u64, pattern_count: usize },
    Terminal { state: SessionState, final_count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub elapsed_ms: u64,
    pub pattern_count: usize,
}

/// Returned by `accept` and `cancel`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub state: SessionState,
    pub final_count: usize,
    pub solution: Solution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub instance_id: String,
    pub state: SessionState,
    pub budget: Budget,
    pub initial_count: usize,
    pub current_count: usize,
    pub final_count: Option<usize>,
    pub ml_prediction: Option<f64>,
    pub naive_prediction: Option<f64>,
    pub event_count: usize,
    /// The most recent progress events, oldest first.
    pub trace_tail: Vec<Progress>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
