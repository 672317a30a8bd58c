//! Dataset build, train/test split, metrics and CSV exports.

pub mod dataset;
pub mod experiment;
pub mod metrics;

pub use dataset::{
    build_dataset, build_record, read_dataset, read_jsonl, write_jsonl, BuildOptions, BuildSummary, DatasetRecord,
    RECORD_VERSION,
};
pub use experiment::{
    compare_optimizers, evaluate, fit_naive, predict_record, run_experiment, split, train_mlp, write_histogram_csv,
    write_history_csv, write_metrics_csv, write_optimizer_csv, write_scatter_csv, Experiment, ExperimentConfig,
    OptimizerRow, DEFAULT_TRAIN_FRACTION,
};
pub use metrics::{mae, mape, r_squared, Histogram, Metrics};
