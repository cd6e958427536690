use crate::data::Splits;
use crate::error::{Error, Result};
use crate::model::Vsdn;
use crate::objectives::LossKind;
use crate::train::{train, Config};

/// One point of a training curve; bounds are per observed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub loss: LossKind,
    pub k: usize,
    pub epoch: usize,
    pub train_bound: f64,
    pub val_bound: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "loss,k,epoch,train_bound,val_bound";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.loss, self.k, self.epoch, self.train_bound, self.val_bound)
    }
}

/// Trains a fresh model for every `(loss, K)` pair for exactly `epochs`
/// epochs (no early stopping) and records the objective being trained on
/// both splits after every epoch.
pub fn k_sweep_training(cfg: &Config, splits: &Splits, k_list: &[usize], epochs: usize) -> Result<Vec<SweepRow>> {
    if k_list.is_empty() || k_list.contains(&0) || epochs == 0 {
        return Err(Error::config("K sweep needs positive K values and at least one epoch"));
    }
    let mut rows = Vec::new();
    for loss in [LossKind::Vae, LossKind::IwaeMixed] {
        for &k in k_list {
            let mut run = cfg.clone();
            run.model.k = k;
            run.train.loss = loss;
            run.train.epochs = epochs;
            run.train.patience = epochs;
            run.train.max_seconds = None;
            let model = Vsdn::new(run.model.clone(), run.train.seed)?;
            let mut pending: Option<(usize, f64)> = None;
            train(model, &run, splits, |h| {
                let per_frame = h.report.objective(loss) / h.report.n_frames.max(1) as f64;
                match h.split {
                    "train" => pending = Some((h.epoch, per_frame)),
                    _ => {
                        if let Some((epoch, train_bound)) = pending.take() {
                            rows.push(SweepRow { loss, k, epoch, train_bound, val_bound: per_frame });
                        }
                    }
                }
            })?;
        }
    }
    Ok(rows)
}
