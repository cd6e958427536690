use ndarray::{Array2, Array3};

use crate::autodiff::{logsumexp, Tape, Var};
use crate::data::TimeSeries;
use crate::encoders::{gather_observations, NodeObs};
use crate::error::{Error, Result};
use crate::model::rollout::{Batch, Drive, FrameRecord, RolloutOpts};
use crate::model::{GaussianObsParams, Vsdn};
use crate::objectives::{batch_bounds, LossKind, LossReport};
use crate::sde::{build_time_grid, LatentPath, TimeGrid};

/// Score of one predicted or reconstructed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameScore {
    pub series_id: u64,
    pub time: f64,
    /// `-log (1/S sum_s p_s(y))` over observed dimensions.
    pub nll: f64,
    /// Mean over observed dimensions of the squared error of the point
    /// estimate.
    pub sq_err: f64,
    /// Average of the decoder means over samples.
    pub point: Vec<f64>,
}

/// Decoded distribution at one query time.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryEmission {
    pub time: f64,
    /// Average of the decoder means over samples.
    pub point: Vec<f64>,
    /// One emission per sample.
    pub samples: Vec<GaussianObsParams>,
}

/// The training objective of a batch on a tape.
pub struct BatchLoss<'t> {
    /// `-(sum of bounds) / frames`, the quantity to minimize.
    pub loss: Var<'t>,
    pub report: LossReport,
}

impl Vsdn {
    /// Posterior bounds of a batch with `k` samples per series.
    pub fn batch_loss<'t>(
        &self,
        p: &[Var<'t>],
        tape: &'t Tape,
        batch: &Batch<'_>,
        kind: LossKind,
        k: usize,
        seed: u64,
    ) -> Result<BatchLoss<'t>> {
        let opts = RolloutOpts { samples: k, drive: Drive::Posterior, seed, record_path: false, record_frames: false };
        let out = self.rollout(p, tape, batch, &batch.obs, opts)?;
        let (vae, iwae, mixed) = batch_bounds(&out.recon, &out.kl, &out.logw, k, self.cfg.beta, self.cfg.alpha)?;
        let chosen = match kind {
            LossKind::Vae => &vae,
            LossKind::IwaeMixed => &mixed,
        };
        let frames = batch.n_frames as f64;
        let loss = chosen.sum().scale(-1.0 / frames);
        if !loss.scalar().is_finite() {
            return Err(Error::Training(format!("non-finite loss {}", loss.scalar())));
        }
        let report = LossReport {
            vae_bound: vae.value().sum(),
            iwae_bound: iwae.value().sum(),
            mixed: mixed.value().sum(),
            kl_total: out.kl.value().sum(),
            recon_total: out.recon.value().sum(),
            per_frame_nll: -out.recon.value().sum() / (frames * k as f64),
            frame_mse: out.sq_err / (frames * k as f64),
            n_frames: batch.n_frames,
            samples: k,
        };
        Ok(BatchLoss { loss, report })
    }

    /// Bounds of a batch without recording gradients.
    pub fn evaluate_bounds(&self, batch: &Batch<'_>, kind: LossKind, k: usize, seed: u64) -> Result<LossReport> {
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        Ok(self.batch_loss(&p, &tape, batch, kind, k, seed)?.report)
    }

    /// Per-sample bound ingredients for one series: `(recon totals, kl, logw)`.
    pub fn sample_bound_terms(&self, series: &TimeSeries, k: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let batch = Batch::new(&[series], self.cfg.max_dt)?;
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let opts = RolloutOpts { samples: k, drive: Drive::Posterior, seed, record_path: false, record_frames: false };
        let out = self.rollout(&p, &tape, &batch, &batch.obs, opts)?;
        let col = |v: &Var<'_>| v.value().iter().copied().collect::<Vec<f64>>();
        Ok((col(&out.recon), col(&out.kl), col(&out.logw)))
    }

    /// `k` posterior paths of `series` on `grid`, with per-step noise, KL
    /// and log-weight increments. Sample `k` uses the same noise whatever
    /// the total number of samples.
    pub fn sample_posterior_paths(&self, series: &TimeSeries, grid: &TimeGrid, k: usize, seed: u64) -> Result<LatentPath> {
        if k == 0 {
            return Err(Error::contract("at least one sample is required"));
        }
        let mut batch = Batch::new(&[series], self.cfg.max_dt)?;
        batch.obs = gather_observations(&[series], grid)?;
        batch.last_node = vec![grid.locate(series.last_time()).unwrap()];
        batch.grid = grid.clone();
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let opts = RolloutOpts { samples: k, drive: Drive::Posterior, seed, record_path: true, record_frames: false };
        let out = self.rollout(&p, &tape, &batch, &batch.obs, opts)?;
        let rec = out.path.unwrap();
        let (nodes, d1) = (grid.len(), self.cfg.d1);
        let steps = nodes - 1;
        let mut states = Array3::zeros((k, nodes, d1));
        let mut noise = Array3::zeros((k, steps, d1));
        let mut kl_steps = Array2::zeros((k, steps));
        let mut logw_steps = Array2::zeros((k, steps));
        for s in 0..k {
            for i in 0..nodes {
                states.slice_mut(ndarray::s![s, i, ..]).assign(&rec.states[i].row(s));
            }
            for i in 0..steps {
                noise.slice_mut(ndarray::s![s, i, ..]).assign(&rec.noise[i].row(s));
                kl_steps[[s, i]] = rec.kl_steps[i][s];
                logw_steps[[s, i]] = rec.logw_steps[i][s];
            }
        }
        let kl_accum = out.kl.value().iter().copied().collect();
        let logw_accum = out.logw.value().iter().copied().collect();
        Ok(LatentPath { states, noise, kl_steps, logw_steps, kl_accum, logw_accum })
    }

    /// Diffusion values (`k x d1` per interval) along `k` posterior paths.
    pub fn diffusion_trace(&self, series: &TimeSeries, k: usize, seed: u64) -> Result<Vec<Array2<f64>>> {
        let batch = Batch::new(&[series], self.cfg.max_dt)?;
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let opts = RolloutOpts { samples: k, drive: Drive::Posterior, seed, record_path: true, record_frames: false };
        Ok(self.rollout(&p, &tape, &batch, &batch.obs, opts)?.path.unwrap().diffusion)
    }

    /// One-step-ahead prediction of every frame after the first from `s`
    /// prior paths conditioned on strictly earlier observations.
    pub fn predict_sequence(&self, series: &TimeSeries, s: usize, seed: u64) -> Result<Vec<FrameScore>> {
        if s == 0 {
            return Err(Error::contract("prediction needs at least one sample"));
        }
        if series.len() < 2 {
            return Err(Error::contract(format!("series {} has fewer than two observations", series.id())));
        }
        let batch = Batch::new(&[series], self.cfg.max_dt)?;
        let mut targets = batch.obs.clone();
        targets[batch.grid.locate(series.times()[0]).unwrap()] = None;
        let out = self.decode_targets(&batch, &targets, s, Drive::Prior, seed)?;
        score_frames(series, &series.times()[1..], &out, s, self.cfg.d2, 1)
    }

    /// Decodes at `query_times` from `s` posterior paths conditioned on
    /// `observed`.
    pub fn interpolate(&self, observed: &TimeSeries, query_times: &[f64], s: usize, seed: u64) -> Result<Vec<QueryEmission>> {
        if query_times.is_empty() {
            return Ok(Vec::new());
        }
        self.check_queries(observed, query_times)?;
        let batch = Batch::with_extra_times(&[observed], query_times, self.cfg.max_dt)?;
        let mut targets: Vec<Option<NodeObs>> = vec![None; batch.grid.len()];
        let d2 = self.cfg.d2;
        for &t in query_times {
            targets[batch.grid.locate(t).unwrap()] = Some(NodeObs {
                rows: Array2::ones((1, 1)),
                input: Array2::zeros((1, 2 * d2)),
                y: Array2::zeros((1, d2)),
                ymask: Array2::zeros((1, d2)),
                count: 1,
            });
        }
        let out = self.decode_targets(&batch, &targets, s, Drive::Posterior, seed)?;
        Ok(out
            .iter()
            .map(|f| QueryEmission {
                time: batch.grid.nodes()[f.node],
                point: (0..d2).map(|j| f.mean.column(j).mean().unwrap()).collect(),
                samples: (0..s)
                    .map(|r| GaussianObsParams { mean: f.mean.row(r).to_vec(), log_std: f.log_std.row(r).to_vec() })
                    .collect(),
            })
            .collect())
    }

    /// Scores reconstruction of the frames of `heldout` from `s` posterior
    /// paths conditioned on `observed`.
    pub fn score_interpolation(&self, observed: &TimeSeries, heldout: &TimeSeries, s: usize, seed: u64) -> Result<Vec<FrameScore>> {
        self.check_queries(observed, heldout.times())?;
        let batch = Batch::with_extra_times(&[observed], heldout.times(), self.cfg.max_dt)?;
        let targets = gather_observations(&[heldout], &batch.grid)?;
        let out = self.decode_targets(&batch, &targets, s, Drive::Posterior, seed)?;
        score_frames(heldout, heldout.times(), &out, s, self.cfg.d2, 0)
    }

    fn check_queries(&self, observed: &TimeSeries, times: &[f64]) -> Result<()> {
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::contract("query times must be strictly ascending"));
            }
        }
        if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t <= observed.last_time())) {
            return Err(Error::contract(format!("query time {t} outside [0, {}]", observed.last_time())));
        }
        Ok(())
    }

    fn decode_targets(&self, batch: &Batch<'_>, targets: &[Option<NodeObs>], s: usize, drive: Drive, seed: u64) -> Result<Vec<FrameRecord>> {
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let opts = RolloutOpts { samples: s, drive, seed, record_path: false, record_frames: true };
        Ok(self.rollout(&p, &tape, batch, targets, opts)?.frames)
    }
}

/// Turns recorded frames of a single series into scores. `skip` is the
/// index of the first row of `target` covered by `times`.
fn score_frames(target: &TimeSeries, times: &[f64], frames: &[FrameRecord], s: usize, d2: usize, skip: usize) -> Result<Vec<FrameScore>> {
    if frames.len() != times.len() {
        return Err(Error::contract(format!("{} decoded frames for {} targets", frames.len(), times.len())));
    }
    let mut scores = Vec::with_capacity(times.len());
    for (n, (f, &t)) in frames.iter().zip(times).enumerate() {
        let row = n + skip;
        let nll = -(logsumexp(&f.loglik)? - (s as f64).ln());
        let point: Vec<f64> = (0..d2).map(|j| f.mean.column(j).mean().unwrap()).collect();
        let observed: Vec<usize> = (0..d2).filter(|&j| target.mask()[[row, j]]).collect();
        let sq_err = observed.iter().map(|&j| (target.values()[[row, j]] - point[j]).powi(2)).sum::<f64>() / observed.len() as f64;
        scores.push(FrameScore { series_id: target.id(), time: t, nll, sq_err, point });
    }
    Ok(scores)
}

/// Convenience: grid of a single series under `max_dt`.
pub fn series_grid(series: &TimeSeries, max_dt: f64) -> Result<TimeGrid> {
    build_time_grid(series.times(), max_dt, series.last_time())
}
