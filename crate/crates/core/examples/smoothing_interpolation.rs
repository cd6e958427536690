//! Trains a smoothing model on sporadic Double-OU data, then compares
//! interpolation of held-out frames with one-step prediction.
//!
//! cargo run --release --example smoothing_interpolation -- --n-seq 300 --epochs 10

use clap::Parser;
use vsdn::model::{InferenceMode, Vsdn};
use vsdn::train::{evaluate_interpolation, evaluate_prediction, make_holdout, train, Config};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 300)]
    n_seq: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let mut cfg = Config::default();
    cfg.data.n_seq = args.n_seq;
    cfg.model.mode = InferenceMode::Smoothing;
    cfg.train.epochs = args.epochs;
    cfg.train.batch_size = 50;
    cfg.train.learning_rate = 1e-3;
    cfg.train.seed = args.seed;
    let splits = cfg.data.build(args.seed)?;
    let model = Vsdn::new(cfg.model.clone(), args.seed)?;
    let out = train(model, &cfg, &splits, |r| {
        if r.split == "val" {
            println!("epoch {:>3} val bound/frame {:.4}", r.epoch, r.report.vae_bound / r.report.n_frames as f64);
        }
    })?;
    let s = cfg.model.prediction_samples;
    let held = make_holdout(&splits.test, cfg.data.holdout_frac, args.seed)?;
    let interp = evaluate_interpolation(&out.model, &held, s, args.seed)?;
    let pred = evaluate_prediction(&out.model, &splits.test, s, args.seed)?;
    println!("interpolation: nll/frame {:.4} mse {:.4} ({} frames)", interp.nll_per_frame, interp.mse, interp.n_frames);
    println!("prediction:    nll/frame {:.4} mse {:.4} ({} frames)", pred.nll_per_frame, pred.mse, pred.n_frames);
    Ok(())
}
