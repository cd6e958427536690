use ndarray::Array2;
use rayon::prelude::*;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::sde::noise::{sample_rng, standard_normal};

/// Parameters of a diagonal Ornstein-Uhlenbeck process
/// `dX = theta (mu - X) dt + sigma dW`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OuParams {
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Default for OuParams {
    fn default() -> Self {
        OuParams { theta: vec![1.0, 0.5], mu: vec![1.0, -1.0], sigma: vec![0.4, 0.3] }
    }
}

impl OuParams {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.theta.len();
        if d == 0 || self.mu.len() != d || self.sigma.len() != d {
            return Err(Error::config("OU parameters need matching, non-empty theta/mu/sigma"));
        }
        if self.theta.iter().chain(&self.sigma).any(|v| !(v.is_finite() && *v > 0.0)) || self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("OU theta and sigma must be positive and finite"));
        }
        Ok(())
    }

    /// Stationary variance `sigma^2 / (2 theta)` per dimension.
    pub fn stationary_var(&self) -> Vec<f64> {
        self.theta.iter().zip(&self.sigma).map(|(t, s)| s * s / (2.0 * t)).collect()
    }
}

/// Initial state of simulated sequences.
#[derive(Clone, Debug, PartialEq)]
pub enum OuStart {
    Stationary,
    Fixed(Vec<f64>),
}

/// Lattice and integration settings for [`simulate_double_ou`].
#[derive(Clone, Debug, PartialEq)]
pub struct OuSimConfig {
    pub n_seq: usize,
    pub horizon: f64,
    pub frame_dt: f64,
    pub sim_dt: f64,
    pub start: OuStart,
}

impl Default for OuSimConfig {
    fn default() -> Self {
        OuSimConfig { n_seq: 2000, horizon: 10.0, frame_dt: 0.1, sim_dt: 0.001, start: OuStart::Stationary }
    }
}

/// Simulates `cfg.n_seq` dense sequences with frames at `k * frame_dt`,
/// `k = 0..=horizon/frame_dt`. Sequence `i` uses its own noise stream, so
/// the output does not depend on thread count.
pub fn simulate_double_ou(params: &OuParams, cfg: &OuSimConfig, seed: u64) -> Result<Vec<TimeSeries>> {
    params.validate()?;
    if !(cfg.horizon > 0.0 && cfg.frame_dt > 0.0 && cfg.sim_dt > 0.0) {
        return Err(Error::config("horizon, frame_dt and sim_dt must be positive"));
    }
    if params.theta.iter().any(|t| t * cfg.sim_dt >= 1.0) {
        return Err(Error::config(format!("unstable OU integration: theta * sim_dt >= 1 (sim_dt = {})", cfg.sim_dt)));
    }
    let sub = (cfg.frame_dt / cfg.sim_dt).round() as usize;
    if sub == 0 || ((sub as f64) * cfg.sim_dt - cfg.frame_dt).abs() > 1e-9 * cfg.frame_dt {
        return Err(Error::config("frame_dt must be a whole multiple of sim_dt"));
    }
    let n_frames = (cfg.horizon / cfg.frame_dt + 1e-9).floor() as usize + 1;
    if let OuStart::Fixed(x0) = &cfg.start {
        if x0.len() != params.dim() {
            return Err(Error::config("fixed OU start has the wrong dimension"));
        }
    }
    let d = params.dim();
    let sq = cfg.sim_dt.sqrt();
    let stat_sd: Vec<f64> = params.stationary_var().iter().map(|v| v.sqrt()).collect();
    (0..cfg.n_seq)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64, 0);
            let mut x: Vec<f64> = match &cfg.start {
                OuStart::Stationary => (0..d).map(|j| params.mu[j] + stat_sd[j] * standard_normal(&mut rng)).collect(),
                OuStart::Fixed(x0) => x0.clone(),
            };
            let mut values = Array2::zeros((n_frames, d));
            for f in 0..n_frames {
                if f > 0 {
                    for _ in 0..sub {
                        for j in 0..d {
                            let e = standard_normal(&mut rng);
                            x[j] += params.theta[j] * (params.mu[j] - x[j]) * cfg.sim_dt + params.sigma[j] * sq * e;
                        }
                    }
                }
                for j in 0..d {
                    values[[f, j]] = x[j];
                }
            }
            let times = (0..n_frames).map(|f| f as f64 * cfg.frame_dt).collect();
            TimeSeries::dense(i as u64, times, values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_limit_follows_exponential_decay() {
        let p = OuParams { theta: vec![1.0, 0.5], mu: vec![1.0, -1.0], sigma: vec![1e-12, 1e-12] };
        let cfg = OuSimConfig { n_seq: 1, horizon: 2.0, frame_dt: 0.5, sim_dt: 1e-4, start: OuStart::Fixed(vec![3.0, 0.0]) };
        let s = &simulate_double_ou(&p, &cfg, 1).unwrap()[0];
        for (f, &t) in s.times().iter().enumerate() {
            for j in 0..2 {
                let x0 = [3.0, 0.0][j];
                let want = p.mu[j] + (x0 - p.mu[j]) * (-p.theta[j] * t).exp();
                assert!((s.values()[[f, j]] - want).abs() < 1e-3, "t {t} dim {j}");
            }
        }
    }

    #[test]
    fn unstable_step_is_rejected() {
        let cfg = OuSimConfig { sim_dt: 1.0, frame_dt: 1.0, ..OuSimConfig::default() };
        assert!(matches!(simulate_double_ou(&OuParams::default(), &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn frame_lattice_matches_horizon() {
        let cfg = OuSimConfig { n_seq: 3, ..OuSimConfig::default() };
        let a = simulate_double_ou(&OuParams::default(), &cfg, 9).unwrap();
        assert_eq!(a[0].len(), 101);
        assert!((a[0].last_time() - 10.0).abs() < 1e-9);
        let b = simulate_double_ou(&OuParams::default(), &cfg, 9).unwrap();
        assert_eq!(a, b);
    }
}
