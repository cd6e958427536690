//! Trains a filtering model with the VAE bound on simulated sporadic
//! Double-OU data and reports test prediction metrics.
//!
//! cargo run --release --example train_filtering -- --n-seq 400 --epochs 5

use clap::Parser;
use vsdn::model::Vsdn;
use vsdn::train::{evaluate_prediction, train, Checkpoint, Config};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 400)]
    n_seq: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_latent: bool,
    /// Save the best model here.
    #[arg(long)]
    save: Option<std::path::PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let mut cfg = Config::default();
    cfg.data.n_seq = args.n_seq;
    cfg.train.epochs = args.epochs;
    cfg.train.batch_size = args.batch_size;
    cfg.train.learning_rate = args.lr;
    cfg.train.seed = args.seed;
    cfg.model.latent = !args.no_latent;
    let splits = cfg.data.build(args.seed)?;
    let model = Vsdn::new(cfg.model.clone(), args.seed)?;
    let out = train(model, &cfg, &splits, |row| {
        println!(
            "epoch {:>3} {:<5} bound/frame {:>8.4} kl {:>9.3} mse {:.4} ({:.1}s)",
            row.epoch,
            row.split,
            row.report.vae_bound / row.report.n_frames as f64,
            row.report.kl_total,
            row.report.frame_mse,
            row.wall_time
        )
    })?;
    println!("best epoch {} (val bound {:.4})", out.best_epoch, out.best_val_bound);
    if let Some(path) = &args.save {
        Checkpoint::from_model(&cfg, &out.model, out.best_epoch as u64).save(path)?;
    }
    let m = evaluate_prediction(&out.model, &splits.test, cfg.model.prediction_samples, args.seed)?;
    println!("test prediction: nll/frame {:.4}  mse {:.4}  frames {}  ({:.1}s)", m.nll_per_frame, m.mse, m.n_frames, m.wall_time);
    Ok(())
}
