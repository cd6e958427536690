use serde::{Deserialize, Serialize};

use crate::encoders::Activation;
use crate::error::{Error, Result};

/// How the posterior drift sees the observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// Past and current observations; the drift is corrected on the interval
    /// leaving each observation.
    Filtering,
    /// All observations, through a backward encoder.
    Smoothing,
}

/// Model hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VsdnConfig {
    /// Latent state dimension.
    pub d1: usize,
    /// Data dimension.
    pub d2: usize,
    /// Encoder feature dimension.
    pub d_h: usize,
    /// Hidden width of the drift, diffusion, decoder and flow networks.
    pub mlp_hidden: usize,
    pub activation: Activation,
    pub max_dt: f64,
    /// Latent trajectories per sequence in the training bounds.
    pub k: usize,
    /// IWAE weight in the mixed objective.
    pub alpha: f64,
    /// KL weight.
    pub beta: f64,
    pub mode: InferenceMode,
    /// Samples used for prediction and interpolation.
    pub prediction_samples: usize,
    /// Decoder log standard deviations are clamped to `[-c, c]`.
    pub log_std_clamp: f64,
    /// Compute the initial latent state from the first observation instead
    /// of using a learned constant.
    pub initializer_net: bool,
    /// `false` freezes the latent state at its initial value (no SDE).
    pub latent: bool,
}

impl Default for VsdnConfig {
    fn default() -> Self {
        VsdnConfig {
            d1: 15,
            d2: 2,
            d_h: 15,
            mlp_hidden: 25,
            activation: Activation::Relu,
            max_dt: 0.01,
            k: 5,
            alpha: 0.5,
            beta: 1.0,
            mode: InferenceMode::Filtering,
            prediction_samples: 25,
            log_std_clamp: 7.0,
            initializer_net: false,
            latent: true,
        }
    }
}

impl VsdnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.d_h == 0 || self.mlp_hidden == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        if !(self.max_dt > 0.0 && self.max_dt.is_finite()) {
            return Err(Error::config(format!("max_dt must be positive, got {}", self.max_dt)));
        }
        if self.k == 0 || self.prediction_samples == 0 {
            return Err(Error::config("k and prediction_samples must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.log_std_clamp > 0.0) {
            return Err(Error::config("log_std_clamp must be positive"));
        }
        Ok(())
    }
}
