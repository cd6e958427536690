//! Three Euler–Maruyama steps with constant drift `phi`: the drift
//! gradient is noise-free when the diffusion ignores the state and noisy
//! when it does not.

use vsdn::verify::{autodiff_gradients, noise_injection_experiment, DiffusionCase};

fn main() -> anyhow::Result<()> {
    let eps = [0.3, -1.2, 0.8];
    for case in [DiffusionCase::StateFree, DiffusionCase::StateDependent] {
        let g = autodiff_gradients(case, 1.0, 0.5, 1.0, 0.1, eps)?;
        println!("{case:?}: dL/dphi = {:.6}, dL/dtheta = {:.6}", g.phi, g.theta);
    }
    let report = noise_injection_experiment(0.1, 1.0, 0.5, 100, 10_000, 0)?;
    for row in report.csv_rows() {
        println!("{row}");
    }
    Ok(())
}
