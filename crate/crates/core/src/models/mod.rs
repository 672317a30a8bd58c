//! The two predictors of the reduced pattern count: a quadratic in the
//! initial pattern count, and a dense MLP over the encoded solution.

pub mod mlp;
pub mod optim;
pub mod persist;
pub mod quadratic;
pub mod train;

pub use mlp::{mlp_init, Activation, Gradients, Layer, MlpModel, SparseInput, TrainingMeta, DEFAULT_HIDDEN};
pub use optim::{Optimizer, OptimizerKind};
pub use persist::{load_model, read_mlp, save_model, write_mlp, Model, MAGIC};
pub use quadratic::{fit_quadratic, QuadraticModel};
pub use train::{mlp_train, mlp_train_observed, EarlyStopping, EpochRecord, History, TrainConfig, Verdict};
