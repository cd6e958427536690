use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Mat, Tape, Var};
use crate::data::TimeSeries;
use crate::encoders::{gather_observations, NodeObs};
use crate::error::{Error, Result};
use crate::model::{InferenceMode, Vsdn};
use crate::sde::noise::{fill_normal, sample_rng};
use crate::sde::{build_time_grid, euler_step_var, logw_increment_var, TimeGrid};

/// A group of series simulated together on the union of their grids.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub series: Vec<&'a TimeSeries>,
    pub grid: TimeGrid,
    pub obs: Vec<Option<NodeObs>>,
    /// Grid node of each series' last observation.
    pub last_node: Vec<usize>,
    /// `B x 2 d2` input of each series' first observation.
    pub first_input: Mat,
    pub n_frames: usize,
}

impl<'a> Batch<'a> {
    pub fn new(series: &[&'a TimeSeries], max_dt: f64) -> Result<Self> {
        Self::with_extra_times(series, &[], max_dt)
    }

    /// Like [`Batch::new`] with additional grid nodes at `extra` (must not
    /// exceed the last observation time).
    pub fn with_extra_times(series: &[&'a TimeSeries], extra: &[f64], max_dt: f64) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let mut times: Vec<f64> = series.iter().flat_map(|s| s.times().iter().copied()).chain(extra.iter().copied()).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let horizon = series.iter().map(|s| s.last_time()).fold(0.0, f64::max);
        let grid = build_time_grid(&times, max_dt, horizon)?;
        let obs = gather_observations(series, &grid)?;
        let last_node = series.iter().map(|s| grid.locate(s.last_time()).unwrap()).collect();
        let d2 = series[0].dim();
        let mut first_input = Array2::zeros((series.len(), 2 * d2));
        for (b, s) in series.iter().enumerate() {
            for j in 0..d2 {
                first_input[[b, j]] = s.values()[[0, j]];
                first_input[[b, d2 + j]] = if s.mask()[[0, j]] { 1.0 } else { 0.0 };
            }
        }
        let n_frames = series.iter().map(|s| s.len()).sum();
        Ok(Batch { series: series.to_vec(), grid, obs, last_node, first_input, n_frames })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Drive {
    Posterior,
    Prior,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RolloutOpts {
    pub samples: usize,
    pub drive: Drive,
    pub seed: u64,
    pub record_path: bool,
    pub record_frames: bool,
}

/// Decoder output at one target node for all `R` rows.
#[derive(Clone, Debug)]
pub(crate) struct FrameRecord {
    pub node: usize,
    /// `R` masked log-likelihoods.
    pub loglik: Vec<f64>,
    /// `R x d2` decoder means.
    pub mean: Mat,
    pub log_std: Mat,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct PathRecord {
    pub states: Vec<Mat>,
    pub noise: Vec<Mat>,
    pub kl_steps: Vec<Vec<f64>>,
    pub logw_steps: Vec<Vec<f64>>,
    pub diffusion: Vec<Mat>,
}

pub(crate) struct RolloutOut<'t> {
    /// `R x 1` summed log-likelihood of the target frames.
    pub recon: Var<'t>,
    /// `R x 1` accumulated KL.
    pub kl: Var<'t>,
    /// `R x 1` accumulated log importance weight.
    pub logw: Var<'t>,
    /// Sum over rows and target frames of the per-frame squared error of
    /// the decoder mean (mean over observed dimensions).
    pub sq_err: f64,
    pub frames: Vec<FrameRecord>,
    pub path: Option<PathRecord>,
}

pub(crate) fn repeat_mat(m: &Mat, k: usize) -> Mat {
    if k == 1 {
        return m.clone();
    }
    let (r, c) = m.dim();
    m.view().insert_axis(Axis(1)).broadcast((r, k, c)).unwrap().to_owned().into_shape_with_order((r * k, c)).unwrap()
}

fn indicator(rows: impl Iterator<Item = bool>) -> (Mat, bool) {
    let v: Vec<f64> = rows.map(|b| if b { 1.0 } else { 0.0 }).collect();
    let all = v.iter().all(|&x| x == 1.0);
    (Array2::from_shape_vec((v.len(), 1), v).unwrap(), all)
}

impl Vsdn {
    /// Simulates `opts.samples` latent paths per series of `batch` and
    /// decodes them at the nodes where `targets` carries frames. Row
    /// `b * samples + k` is sample `k` of series `b`; its noise comes from
    /// the stream `(seed, series id, k)`.
    pub(crate) fn rollout<'t>(
        &self,
        p: &[Var<'t>],
        tape: &'t Tape,
        batch: &Batch<'_>,
        targets: &[Option<NodeObs>],
        opts: RolloutOpts,
    ) -> Result<RolloutOut<'t>> {
        let s = opts.samples;
        let b = batch.len();
        let rows = b * s;
        let d1 = self.cfg.d1;
        let grid = &batch.grid;
        let n = grid.len();
        if targets.len() != n {
            return Err(Error::contract("target slots do not match the grid"));
        }
        let fwd = self.fwd.run_forward(p, tape, grid, &batch.obs, b)?;
        let posterior = opts.drive == Drive::Posterior && self.cfg.latent;
        let back = match (&self.bwd, posterior) {
            (Some(enc), true) => Some(enc.run_backward(p, tape, grid, &batch.obs, b)?),
            _ => None,
        };
        let mut rngs: Vec<ChaCha8Rng> = batch
            .series
            .iter()
            .flat_map(|ser| (0..s as u64).map(move |k| sample_rng(opts.seed, ser.id(), k)))
            .collect();

        let mut x = self.initial_state(p, tape, &batch.first_input, s)?;
        let zeros = || tape.constant(Array2::zeros((rows, 1)));
        let (mut recon, mut kl, mut logw) = (zeros(), zeros(), zeros());
        let mut sq_err = 0.0;
        let mut frames = Vec::new();
        let mut path = opts.record_path.then(PathRecord::default);
        let mut eps = Array2::zeros((rows, d1));

        for i in 0..n {
            let pre = &fwd.pre[i];
            if let Some(path) = &mut path {
                path.states.push(x.value().clone());
            }
            if let Some(o) = &targets[i] {
                let part = Self::feature_part(&self.decoder, p, pre).repeat_rows(s);
                let out = Self::with_state(&self.decoder, p, &x, &part);
                let (mean, log_std) = self.emission(&out);
                let y = repeat_mat(&o.y, s);
                let m = repeat_mat(&o.ymask, s);
                let ll = Self::row_loglik(&mean, &log_std, &tape.constant(y.clone()), &tape.constant(m.clone()));
                for r in 0..rows {
                    let cnt: f64 = m.row(r).sum();
                    if cnt > 0.0 {
                        let se: f64 = (0..self.cfg.d2).map(|j| m[[r, j]] * (y[[r, j]] - mean.value()[[r, j]]).powi(2)).sum();
                        sq_err += se / cnt;
                    }
                }
                if opts.record_frames {
                    frames.push(FrameRecord {
                        node: i,
                        loglik: ll.value().iter().copied().collect(),
                        mean: mean.value().clone(),
                        log_std: log_std.value().clone(),
                    });
                }
                recon = recon.add(&ll);
            }
            if i + 1 == n || !self.cfg.latent {
                continue;
            }
            let dt = grid.dt()[i];
            let log_r = self.log_diffusion(p, pre)?;
            let r = log_r.exp().repeat_rows(s);
            if let Some(path) = &mut path {
                path.diffusion.push(r.value().clone());
            }
            let hg = Self::with_state(&self.drift, p, &x, &Self::feature_part(&self.drift, p, pre).repeat_rows(s));
            let q_feature = if !posterior {
                None
            } else {
                match self.cfg.mode {
                    InferenceMode::Filtering => match (&batch.obs[i], &fwd.post[i]) {
                        (Some(o), Some(post)) if o.all_rows() => Some(pre.add(post)),
                        (Some(o), Some(post)) => Some(pre.add(&post.mul(&tape.constant(o.rows.clone())))),
                        _ => None,
                    },
                    InferenceMode::Smoothing => {
                        let bk = &back.as_ref().unwrap()[i];
                        let (active, all) = indicator(batch.last_node.iter().map(|&l| i < l));
                        Some(if all { pre.add(bk) } else { pre.add(&bk.mul(&tape.constant(active))) })
                    }
                }
            };
            for (row, rng) in eps.rows_mut().into_iter().zip(rngs.iter_mut()) {
                fill_normal(rng, row.into_slice().unwrap());
            }
            let eps_v = tape.constant(eps.clone());
            let drift = match &q_feature {
                Some(f) => {
                    let hq = Self::with_state(&self.drift, p, &x, &Self::feature_part(&self.drift, p, f).repeat_rows(s));
                    let inv_r = log_r.neg().exp().repeat_rows(s);
                    let (lw, k) = logw_increment_var(&hq, &hg, &inv_r, dt, &eps_v);
                    if let Some(path) = &mut path {
                        path.kl_steps.push(k.value().iter().copied().collect());
                        path.logw_steps.push(lw.value().iter().copied().collect());
                    }
                    kl = kl.add(&k);
                    logw = logw.add(&lw);
                    hq
                }
                None => {
                    if let Some(path) = &mut path {
                        path.kl_steps.push(vec![0.0; rows]);
                        path.logw_steps.push(vec![0.0; rows]);
                    }
                    hg
                }
            };
            if let Some(path) = &mut path {
                path.noise.push(eps.clone());
            }
            x = euler_step_var(&x, &drift, &r, dt, &eps_v);
            if x.value().iter().any(|v| !v.is_finite()) {
                return Err(Error::PathFault { node: i + 1 });
            }
        }
        if let Some(path) = &mut path {
            if !self.cfg.latent {
                for _ in 1..n {
                    path.noise.push(Array2::zeros((rows, d1)));
                    path.kl_steps.push(vec![0.0; rows]);
                    path.logw_steps.push(vec![0.0; rows]);
                }
            }
        }
        Ok(RolloutOut { recon, kl, logw, sq_err, frames, path })
    }
}
