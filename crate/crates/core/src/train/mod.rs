//! Configuration, training with early stopping, checkpoints and the
//! prediction / interpolation metrics.

mod checkpoint;
mod config;
mod eval;
mod fit;

pub use checkpoint::{Checkpoint, MAGIC};
pub use config::{Config, DataConfig, TrainConfig};
pub use eval::{
    aggregate, evaluate_interpolation, evaluate_prediction, interpolation_scores, make_holdout, prediction_scores, HeldOut,
    Metrics, Task,
};
pub use fit::{evaluate_split, train, train_step, write_history, EarlyStopping, HistoryRow, TrainOutcome};
