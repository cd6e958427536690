use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamHyper;
use crate::data::{load_sporadic_csv, simulate_double_ou, split_dataset, sporadify_all, OuParams, OuSimConfig, OuStart, Splits, TimeSeries};
use crate::sde::noise::derive_seed;
use crate::error::{Error, Result};
use crate::model::VsdnConfig;
use crate::objectives::LossKind;

/// Optimization and early-stopping settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// Samples for prediction and interpolation metrics.
    pub eval_samples: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Global gradient-norm cap applied before each Adam step.
    pub clip_norm: f64,
    /// Stops training after this many seconds (checked between epochs).
    pub max_seconds: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 250,
            patience: 25,
            eval_samples: 25,
            seed: 0,
            loss: LossKind::Vae,
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            clip_norm: 10.0,
            max_seconds: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 || self.eval_samples == 0 {
            return Err(Error::config("epochs, batch_size, patience and eval_samples must be at least 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm must be positive"));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper { learning_rate: self.learning_rate, weight_decay: self.weight_decay, ..AdamHyper::default() }
    }
}

/// Dataset source: a generated Double-OU set or a sporadic CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Read this CSV instead of simulating.
    pub csv: Option<PathBuf>,
    pub n_seq: usize,
    pub horizon: f64,
    pub frame_dt: f64,
    pub sim_dt: f64,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub p_time: f64,
    pub p_dim: f64,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Standardize with training-split statistics.
    pub normalize: bool,
    /// Fraction of frames held out per series for interpolation.
    pub holdout_frac: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let ou = OuParams::default();
        let sim = OuSimConfig::default();
        DataConfig {
            csv: None,
            n_seq: sim.n_seq,
            horizon: sim.horizon,
            frame_dt: sim.frame_dt,
            sim_dt: sim.sim_dt,
            theta: ou.theta,
            mu: ou.mu,
            sigma: ou.sigma,
            p_time: 0.5,
            p_dim: 0.3,
            train_frac: 0.7,
            val_frac: 0.15,
            normalize: false,
            holdout_frac: 0.5,
        }
    }
}

impl DataConfig {
    pub fn ou_params(&self) -> OuParams {
        OuParams { theta: self.theta.clone(), mu: self.mu.clone(), sigma: self.sigma.clone() }
    }

    pub fn ou_sim(&self) -> OuSimConfig {
        OuSimConfig { n_seq: self.n_seq, horizon: self.horizon, frame_dt: self.frame_dt, sim_dt: self.sim_dt, start: OuStart::Stationary }
    }

    /// Simulates the Double-OU lattice and, unless `dense`, sporadifies it.
    pub fn generate(&self, seed: u64, dense: bool) -> Result<Vec<TimeSeries>> {
        let lattice = simulate_double_ou(&self.ou_params(), &self.ou_sim(), derive_seed(seed, &[0xda7a]))?;
        if dense {
            return Ok(lattice);
        }
        sporadify_all(&lattice, self.p_time, self.p_dim, derive_seed(seed, &[0x5fa]))
    }

    /// Loads the CSV, or simulates and sporadifies the OU data set, then
    /// splits (and optionally normalizes) it.
    pub fn build(&self, seed: u64) -> Result<Splits> {
        let series = match &self.csv {
            Some(path) => load_sporadic_csv(path)?,
            None => self.generate(seed, false)?,
        };
        let mut splits = split_dataset(series, self.train_frac, self.val_frac, derive_seed(seed, &[0x5e1]))?;
        if self.normalize {
            splits.normalize()?;
        }
        Ok(splits)
    }
}

/// Everything needed to reproduce a run; stored in checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: VsdnConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.data.csv.is_none() {
            self.data.ou_params().validate()?;
            if self.data.ou_params().dim() != self.model.d2 {
                return Err(Error::config(format!(
                    "model d2 = {} but the OU process has {} dimensions",
                    self.model.d2,
                    self.data.ou_params().dim()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = Config::from_toml("[model]\nmode = \"smoothing\"\n[train]\nloss = \"iwae_mixed\"\nbatch_size = 50\n").unwrap();
        assert_eq!(cfg.train.batch_size, 50);
        assert_eq!(cfg.train.patience, 25);
        assert_eq!(cfg.model.k, 5);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(Config::from_toml("[train]\nbatchsize = 3\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[model]\nalpha = 1.5\n"), Err(Error::Config(_))));
    }
}
