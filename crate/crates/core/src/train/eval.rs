use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{holdout_frames, TimeSeries};
use crate::error::{Error, Result};
use crate::model::{FrameScore, Vsdn};
use crate::sde::noise::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Prediction,
    Interpolation,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Prediction => "prediction",
            Task::Interpolation => "interpolation",
        })
    }
}

/// Aggregate scores over all evaluated frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub task: Task,
    pub nll_per_frame: f64,
    pub mse: f64,
    pub n_frames: usize,
    pub wall_time: f64,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "task,nll_per_frame,mse,n_frames,wall_time";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{:.3}", self.task, self.nll_per_frame, self.mse, self.n_frames, self.wall_time)
    }
}

/// Series prepared for interpolation: what the model sees and the frames
/// it must recover.
#[derive(Clone, Debug)]
pub struct HeldOut {
    pub observed: TimeSeries,
    pub heldout: Option<TimeSeries>,
}

/// Removes about `frac` of each series' frames (never the end points).
pub fn make_holdout(data: &[TimeSeries], frac: f64, seed: u64) -> Result<Vec<HeldOut>> {
    data.iter()
        .map(|s| holdout_frames(s, frac, seed).map(|(observed, heldout)| HeldOut { observed, heldout }))
        .collect()
}

/// Mean NLL and mean squared error over frames.
pub fn aggregate(task: Task, scores: &[FrameScore], wall_time: f64) -> Result<Metrics> {
    if scores.is_empty() {
        return Err(Error::config("no frames to evaluate"));
    }
    let n = scores.len() as f64;
    let nll = scores.iter().map(|s| s.nll).sum::<f64>() / n;
    let mse = scores.iter().map(|s| s.sq_err).sum::<f64>() / n;
    if !nll.is_finite() || !mse.is_finite() {
        return Err(Error::Training(format!("non-finite {task} metrics")));
    }
    Ok(Metrics { task, nll_per_frame: nll, mse, n_frames: scores.len(), wall_time })
}

/// One-step-ahead prediction scores of every frame after the first.
pub fn prediction_scores(model: &Vsdn, data: &[TimeSeries], samples: usize, seed: u64) -> Result<Vec<FrameScore>> {
    let per: Vec<Result<Vec<FrameScore>>> =
        data.par_iter().map(|s| model.predict_sequence(s, samples, derive_seed(seed, &[1]))).collect();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

/// Reconstruction scores of held-out frames.
pub fn interpolation_scores(model: &Vsdn, data: &[HeldOut], samples: usize, seed: u64) -> Result<Vec<FrameScore>> {
    let per: Vec<Result<Vec<FrameScore>>> = data
        .par_iter()
        .map(|h| match &h.heldout {
            Some(held) => model.score_interpolation(&h.observed, held, samples, derive_seed(seed, &[2])),
            None => Ok(Vec::new()),
        })
        .collect();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

pub fn evaluate_prediction(model: &Vsdn, data: &[TimeSeries], samples: usize, seed: u64) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::config("empty evaluation set"));
    }
    let t = Instant::now();
    let scores = prediction_scores(model, data, samples, seed)?;
    aggregate(Task::Prediction, &scores, t.elapsed().as_secs_f64())
}

pub fn evaluate_interpolation(model: &Vsdn, data: &[HeldOut], samples: usize, seed: u64) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::config("empty evaluation set"));
    }
    let t = Instant::now();
    let scores = interpolation_scores(model, data, samples, seed)?;
    aggregate(Task::Interpolation, &scores, t.elapsed().as_secs_f64())
}
