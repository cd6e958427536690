use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{adam_step, clip_global_norm, ParamStore, Tape};
use crate::data::{Splits, TimeSeries};
use crate::error::{Error, Result};
use crate::model::{Batch, Vsdn};
use crate::objectives::{LossKind, LossReport};
use crate::sde::noise::derive_seed;
use crate::train::Config;

const VAL_STREAM: u64 = 0x7661_6c;

/// One row of the epoch history.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub split: &'static str,
    pub report: LossReport,
    pub wall_time: f64,
}

/// Tracks the best validation bound and decides when to stop.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::NEG_INFINITY, best_epoch: None, wait: 0 }
    }

    /// Records the validation bound of `epoch`; returns whether it is a new
    /// best.
    pub fn record(&mut self, epoch: usize, bound: f64) -> bool {
        if bound > self.best {
            self.best = bound;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            true
        } else {
            self.wait += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.wait >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best_epoch.map(|e| (e, self.best))
    }
}

/// Result of [`train`]: the model restored to its best validation epoch.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Vsdn,
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
    pub best_val_bound: f64,
    pub epochs_run: usize,
}

/// Writes the epoch history as CSV.
pub fn write_history(w: &mut impl std::io::Write, history: &[HistoryRow]) -> std::io::Result<()> {
    writeln!(w, "{}", LossReport::CSV_HEADER)?;
    for h in history {
        writeln!(w, "{}", h.report.csv_row(h.epoch, h.split, h.wall_time))?;
    }
    Ok(())
}

/// Bounds of `data` with fixed noise, in batches of `batch_size`.
pub fn evaluate_split(model: &Vsdn, data: &[TimeSeries], kind: LossKind, k: usize, batch_size: usize, seed: u64) -> Result<LossReport> {
    let mut total = LossReport::default();
    for chunk in data.chunks(batch_size.max(1)) {
        let refs: Vec<&TimeSeries> = chunk.iter().collect();
        let batch = Batch::new(&refs, model.config().max_dt)?;
        total.merge(&model.evaluate_bounds(&batch, kind, k, seed)?);
    }
    Ok(total)
}

/// One optimization step on `batch`; returns the batch report.
pub fn train_step(model: &mut Vsdn, batch: &Batch<'_>, cfg: &Config, seed: u64) -> Result<LossReport> {
    let tape = Tape::new();
    let p = tape.bind(model.store());
    let out = model.batch_loss(&p, &tape, batch, cfg.train.loss, cfg.model.k, seed)?;
    let mut grads = tape.backward(&out.loss, model.store())?;
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    clip_global_norm(&mut grads, cfg.train.clip_norm);
    adam_step(model.store_mut(), &grads, &cfg.train.adam())?;
    Ok(out.report)
}

/// Trains `model` on `splits.train`, early-stopping on the validation
/// bound, and returns the best-validation model with the epoch history.
/// `on_epoch` sees every history row as it is produced.
pub fn train(mut model: Vsdn, cfg: &Config, splits: &Splits, mut on_epoch: impl FnMut(&HistoryRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::config("training and validation splits must be nonempty"));
    }
    if let Some(s) = splits.train.iter().chain(&splits.val).find(|s| s.dim() != cfg.model.d2) {
        return Err(Error::config(format!("series {} has {} dimensions, model expects {}", s.id(), s.dim(), cfg.model.d2)));
    }
    let tc = &cfg.train;
    let start = Instant::now();
    let mut stopper = EarlyStopping::new(tc.patience);
    let mut best_store: Option<ParamStore> = None;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let val_seed = derive_seed(tc.seed, &[VAL_STREAM]);
    let mut epochs_run = 0;

    for epoch in 1..=tc.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tc.seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let mut train_report = LossReport::default();
        for (bi, idx) in order.chunks(tc.batch_size).enumerate() {
            let refs: Vec<&TimeSeries> = idx.iter().map(|&i| &splits.train[i]).collect();
            let batch = Batch::new(&refs, cfg.model.max_dt)?;
            let seed = derive_seed(tc.seed, &[epoch as u64, bi as u64]);
            let report = train_step(&mut model, &batch, cfg, seed).map_err(|e| match e {
                e @ (Error::NonFiniteGradient(_) | Error::Training(_) | Error::PathFault { .. } | Error::StepFault { .. }) => {
                    Error::Training(format!("epoch {epoch}, batch {bi}: {e}"))
                }
                other => other,
            })?;
            train_report.merge(&report);
        }
        let wall = start.elapsed().as_secs_f64();
        let row = HistoryRow { epoch, split: "train", report: train_report, wall_time: wall };
        on_epoch(&row);
        history.push(row);

        let val = evaluate_split(&model, &splits.val, tc.loss, cfg.model.k, tc.batch_size, val_seed)?;
        let bound = val.objective(tc.loss);
        if !bound.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: non-finite validation bound")));
        }
        if stopper.record(epoch, bound) {
            best_store = Some(model.store().clone());
        }
        let row = HistoryRow { epoch, split: "val", report: val, wall_time: start.elapsed().as_secs_f64() };
        on_epoch(&row);
        history.push(row);
        epochs_run = epoch;
        if stopper.should_stop() || tc.max_seconds.is_some_and(|m| start.elapsed().as_secs_f64() >= m) {
            break;
        }
    }
    let (best_epoch, best_val_bound) = stopper.best().expect("at least one epoch ran");
    if let Some(store) = best_store {
        *model.store_mut() = store;
    }
    Ok(TrainOutcome { model, history, best_epoch, best_val_bound, epochs_run })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_stops_after_first_worse_epoch() {
        let mut s = EarlyStopping::new(1);
        assert!(s.record(1, -3.0));
        assert!(!s.should_stop());
        assert!(!s.record(2, -3.5));
        assert!(s.should_stop());
        assert_eq!(s.best(), Some((1, -3.0)));
    }

    #[test]
    fn improvement_resets_the_counter() {
        let mut s = EarlyStopping::new(2);
        s.record(1, -3.0);
        s.record(2, -4.0);
        s.record(3, -2.0);
        s.record(4, -2.5);
        assert!(!s.should_stop());
        s.record(5, -2.1);
        assert!(s.should_stop());
        assert_eq!(s.best(), Some((3, -2.0)));
    }
}
