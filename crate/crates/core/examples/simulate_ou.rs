//! Simulates the Double-OU benchmark, sporadifies it and writes both
//! versions as CSV.
//!
//! cargo run --release --example simulate_ou -- /tmp/ou

use vsdn::data::{simulate_double_ou, sporadify_all, write_sporadic_csv, OuParams, OuSimConfig};

fn main() -> anyhow::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "ou_out".into()));
    std::fs::create_dir_all(&dir)?;
    let params = OuParams::default();
    let sim = OuSimConfig { n_seq: 100, ..Default::default() };
    let dense = simulate_double_ou(&params, &sim, 7)?;
    let sparse = sporadify_all(&dense, 0.5, 0.3, 7)?;
    write_sporadic_csv(dir.join("dense.csv"), &dense)?;
    write_sporadic_csv(dir.join("sporadic.csv"), &sparse)?;

    let stationary = params.stationary_var();
    let cells: usize = sparse.iter().map(|s| s.observed_cells()).sum();
    let frames: usize = sparse.iter().map(|s| s.len()).sum();
    println!("{} sequences of {} frames; stationary variances {:?}", dense.len(), dense[0].len(), stationary);
    println!("sporadic: {frames} frames kept, {cells} observed cells ({:.1}% of frames, {:.1}% of their cells)",
        100.0 * frames as f64 / (dense.len() * dense[0].len()) as f64,
        50.0 * cells as f64 / frames as f64);
    println!("wrote {}", dir.display());
    Ok(())
}
