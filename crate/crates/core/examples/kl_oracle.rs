//! Path KL between two constant-drift SDEs sharing a diffusion: closed
//! form against Monte Carlo of the transition-density ratio.

use vsdn::verify::{kl_mc_oracle, KlOracleReport};

fn main() -> anyhow::Result<()> {
    println!("{}", KlOracleReport::CSV_HEADER);
    for gap in [0.5, 1.0, 2.0] {
        for r in [0.5, 1.0, 2.0] {
            let rep = kl_mc_oracle(gap, 0.0, r, 1.0, 1e-3, 20_000, 1)?;
            println!("{}", rep.csv_row());
        }
    }
    Ok(())
}
