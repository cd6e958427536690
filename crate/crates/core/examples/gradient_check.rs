//! Tape gradients of the full VAE loss against central differences on a
//! two-frame sequence with frozen noise.

use vsdn::model::{Vsdn, VsdnConfig};
use vsdn::verify::{gradient_check, toy_series};

fn main() -> anyhow::Result<()> {
    let cfg = VsdnConfig { d1: 2, d2: 2, d_h: 4, ..Default::default() };
    let model = Vsdn::new(cfg.clone(), 13)?;
    let report = gradient_check(&model, &toy_series()?, cfg.k, 5, 1e-5, 1e-6)?;
    println!(
        "loss {:.6}; {} parameters; max relative error {:.3e} at index {}",
        report.loss, report.n_params, report.max_rel_err, report.worst_index
    );
    Ok(())
}
