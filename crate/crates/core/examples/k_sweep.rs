//! Training curves of the VAE and importance-weighted objectives for
//! several numbers of sampled paths.
//!
//! cargo run --release --example k_sweep -- 5

use vsdn::train::Config;
use vsdn::verify::{k_sweep_training, SweepRow};

fn main() -> anyhow::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(3), |a| a.parse())?;
    let mut cfg = Config::default();
    cfg.data.n_seq = 100;
    cfg.train.batch_size = 35;
    cfg.train.learning_rate = 1e-3;
    let splits = cfg.data.build(0)?;
    let rows = k_sweep_training(&cfg, &splits, &[1, 5], epochs)?;
    println!("{}", SweepRow::CSV_HEADER);
    for r in rows {
        println!("{}", r.csv_row());
    }
    Ok(())
}
