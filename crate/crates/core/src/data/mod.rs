//! Sporadic time series: synthetic Ornstein-Uhlenbeck data, irregular
//! sub-sampling, CSV ingestion, normalization and splitting.

mod csv_io;
mod normalize;
mod ou;
mod series;
mod sporadic;
mod split;

pub use csv_io::{load_sporadic_csv, read_sporadic_csv, write_sporadic, write_sporadic_csv};
pub use normalize::{denormalize, fit_norm_stats, normalize};
pub use ou::{simulate_double_ou, OuParams, OuSimConfig, OuStart};
pub use series::{segment_by_length, NormStats, TimeSeries};
pub use sporadic::{holdout_frames, sporadify, sporadify_all};
pub use split::{split_dataset, Splits};
