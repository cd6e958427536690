//! Briefly trains a model, then estimates the VAE bound and the
//! importance-weighted bound for increasing numbers of paths.

use vsdn::model::Vsdn;
use vsdn::train::{train, Config};
use vsdn::verify::{assess_ordering, bound_ordering_sweep, BoundRow};

fn main() -> anyhow::Result<()> {
    let mut cfg = Config::default();
    cfg.data.n_seq = 200;
    cfg.train.epochs = 5;
    cfg.train.batch_size = 50;
    cfg.train.learning_rate = 1e-3;
    let splits = cfg.data.build(1)?;
    let out = train(Vsdn::new(cfg.model.clone(), 1)?, &cfg, &splits, |_| {})?;
    let series: Vec<_> = splits.test.iter().take(3).cloned().collect();
    let rows = bound_ordering_sweep(&out.model, &series, &[1, 5, 25], 200, 3)?;
    println!("{}", BoundRow::CSV_HEADER);
    for r in &rows {
        println!("{}", r.csv_row());
    }
    let v = assess_ordering(&rows);
    println!("worst decrease {:.2} se, K=1 gap {:?} se", v.worst_decrease_se, v.k1_gap_se);
    Ok(())
}
