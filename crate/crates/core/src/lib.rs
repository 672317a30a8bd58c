//! Core algorithms for trimcast: one-dimensional cutting-stock instances,
//! initial solutions, anytime pattern reduction, the canonical solution
//! encoding and the two pattern-count predictors.

pub mod encoder;
pub mod error;
pub mod instancegen;
pub mod models;
pub mod pipeline;
pub mod reducer;
pub mod solution;
pub mod trimsolver;

pub use encoder::{decode, encode, feature_vector, EncoderConfig, FeatureMatrix};
pub use error::{Error, Result};
pub use models::{fit_quadratic, load_model, mlp_train, save_model, MlpModel, Model, OptimizerKind, QuadraticModel, TrainConfig};
pub use reducer::{reduce, reduce_by_split, Budget, CancelToken, ReduceConfig, ReduceTrace, TerminalReason};
pub use solution::{are_equivalent, validate, Entry, Family, Instance, Item, Pattern, ProductionVector, Solution, Width};
