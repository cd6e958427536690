//! The variational stochastic differential network: prior and posterior
//! latent SDEs driven by ODE-RNN features, a shared diagonal diffusion and
//! a Gaussian decoder.

mod config;
mod network;
mod ops;
mod rollout;

pub use config::{InferenceMode, VsdnConfig};
pub use network::{gaussian_nll, GaussianObsParams, Vsdn};
pub use ops::{series_grid, BatchLoss, FrameScore, QueryEmission};
pub use rollout::Batch;
