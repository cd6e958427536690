//! Evidence lower bounds: the continuous-time VAE bound, the
//! importance-weighted bound and their convex mix.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{logsumexp, Var};
use crate::error::{Error, Result};
use crate::sde::LatentPath;

/// Which bound training maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Vae,
    IwaeMixed,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vae" => Ok(LossKind::Vae),
            "iwae" | "iwae_mixed" => Ok(LossKind::IwaeMixed),
            other => Err(Error::config(format!("unknown loss `{other}` (expected vae or iwae_mixed)"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Vae => "vae",
            LossKind::IwaeMixed => "iwae",
        })
    }
}

fn sample_totals(paths: &LatentPath, recon: &Array2<f64>) -> Result<Vec<f64>> {
    let k = paths.samples();
    if k == 0 {
        return Err(Error::contract("bounds need at least one sample"));
    }
    if recon.nrows() != k {
        return Err(Error::contract(format!("{} reconstruction rows for {k} samples", recon.nrows())));
    }
    Ok(recon.rows().into_iter().map(|r| r.sum()).collect())
}

/// `mean_k (sum_i recon[k, i] - beta * kl[k])`.
pub fn vae_bound(paths: &LatentPath, recon_logliks: &Array2<f64>, beta: f64) -> Result<f64> {
    let rec = sample_totals(paths, recon_logliks)?;
    let k = rec.len() as f64;
    Ok(rec.iter().zip(&paths.kl_accum).map(|(r, kl)| r - beta * kl).sum::<f64>() / k)
}

/// `logsumexp_k (logw[k] + sum_i recon[k, i]) - ln K`.
pub fn iwae_bound(paths: &LatentPath, recon_logliks: &Array2<f64>) -> Result<f64> {
    let rec = sample_totals(paths, recon_logliks)?;
    let terms: Vec<f64> = rec.iter().zip(&paths.logw_accum).map(|(r, w)| r + w).collect();
    Ok(logsumexp(&terms)? - (terms.len() as f64).ln())
}

/// `(1 - alpha) * vae + alpha * iwae`.
pub fn mixed_objective(vae: f64, iwae: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok((1.0 - alpha) * vae + alpha * iwae)
}

/// Per-series bounds on the tape from `R x 1` per-sample totals, rows
/// grouped as `b * k + sample`. Returns `(vae, iwae, mixed)`, each `B x 1`.
pub fn batch_bounds<'t>(
    recon: &Var<'t>,
    kl: &Var<'t>,
    logw: &Var<'t>,
    k: usize,
    beta: f64,
    alpha: f64,
) -> Result<(Var<'t>, Var<'t>, Var<'t>)> {
    if k == 0 || !recon.rows().is_multiple_of(k) {
        return Err(Error::contract(format!("{} rows do not split into groups of {k}", recon.rows())));
    }
    let b = recon.rows() / k;
    let vae = recon.sub(&kl.scale(beta)).reshape((b, k)).sum_cols().scale(1.0 / k as f64);
    let iwae = logw.add(recon).reshape((b, k)).logsumexp_cols().add_scalar(-(k as f64).ln());
    let mixed = vae.scale(1.0 - alpha).add(&iwae.scale(alpha));
    Ok((vae, iwae, mixed))
}

/// Bounds and diagnostics summed over a set of series (maximization sign).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub vae_bound: f64,
    pub iwae_bound: f64,
    pub mixed: f64,
    /// Sum of KL over series and samples.
    pub kl_total: f64,
    /// Sum of reconstruction log-likelihood over series and samples.
    pub recon_total: f64,
    /// Reconstruction NLL per frame, averaged over samples.
    pub per_frame_nll: f64,
    /// Reconstruction MSE per frame, averaged over samples.
    pub frame_mse: f64,
    pub n_frames: usize,
    pub samples: usize,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "epoch,split,vae_bound,iwae_bound,mixed,kl_total,recon_total,nll_per_frame,mse,wall_time";

    /// Adds another report over disjoint series.
    pub fn merge(&mut self, o: &LossReport) {
        let frames = self.n_frames + o.n_frames;
        if frames > 0 {
            let w = |a: f64, b: f64| (a * self.n_frames as f64 + b * o.n_frames as f64) / frames as f64;
            self.per_frame_nll = w(self.per_frame_nll, o.per_frame_nll);
            self.frame_mse = w(self.frame_mse, o.frame_mse);
        }
        self.vae_bound += o.vae_bound;
        self.iwae_bound += o.iwae_bound;
        self.mixed += o.mixed;
        self.kl_total += o.kl_total;
        self.recon_total += o.recon_total;
        self.n_frames = frames;
        self.samples = o.samples.max(self.samples);
    }

    /// The bound selected by `kind`.
    pub fn objective(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Vae => self.vae_bound,
            LossKind::IwaeMixed => self.mixed,
        }
    }

    pub fn csv_row(&self, epoch: usize, split: &str, wall_time: f64) -> String {
        format!(
            "{epoch},{split},{},{},{},{},{},{},{},{wall_time:.3}",
            self.vae_bound, self.iwae_bound, self.mixed, self.kl_total, self.recon_total, self.per_frame_nll, self.frame_mse
        )
    }
}
