use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("solutions reference different instances ({0} vs {1})")]
    InstanceMismatch(String, String),

    #[error("pattern {pattern:?} exceeds master width {master}")]
    Overfull { pattern: Vec<u32>, master: u32 },

    #[error("solution too large: {patterns} patterns, encoder holds {max}")]
    SolutionTooLarge { patterns: usize, max: usize },

    #[error("pattern too wide: {distinct} distinct widths, encoder holds {max}")]
    PatternTooWide { distinct: usize, max: usize },

    #[error("malformed feature matrix: {0}")]
    MalformedMatrix(String),

    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),

    #[error("family CUSTOM has no preset; supply a config")]
    CustomFamily,

    #[error("oracle limits exceeded: {0}")]
    OracleLimits(String),

    #[error("least-squares system is singular or ill-conditioned")]
    Singular,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
