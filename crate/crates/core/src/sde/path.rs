use ndarray::{Array2, Array3};

/// `K` sampled latent trajectories on a grid together with the noise that
/// produced them and the running KL / log-weight totals.
#[derive(Clone, Debug)]
pub struct LatentPath {
    /// `K x nodes x d1`.
    pub states: Array3<f64>,
    /// `K x intervals x d1` standard-normal draws.
    pub noise: Array3<f64>,
    /// `K x intervals` per-interval KL increments.
    pub kl_steps: Array2<f64>,
    /// `K x intervals` per-interval log-weight increments.
    pub logw_steps: Array2<f64>,
    pub kl_accum: Vec<f64>,
    pub logw_accum: Vec<f64>,
}

impl LatentPath {
    pub fn samples(&self) -> usize {
        self.kl_accum.len()
    }
}

impl LatentPath {
    /// A path holding only per-sample totals (no states or increments).
    pub fn from_totals(kl_accum: Vec<f64>, logw_accum: Vec<f64>) -> Self {
        let k = kl_accum.len();
        LatentPath {
            states: Array3::zeros((k, 0, 0)),
            noise: Array3::zeros((k, 0, 0)),
            kl_steps: Array2::zeros((k, 0)),
            logw_steps: Array2::zeros((k, 0)),
            kl_accum,
            logw_accum,
        }
    }
}
