//! Discretized SDE machinery: time grids, Euler–Maruyama steps, Gaussian
//! transition densities, KL and importance-weight increments.

mod grid;
pub mod noise;
mod path;
mod step;

pub use grid::{build_time_grid, TimeGrid};
pub use path::LatentPath;
pub use step::{
    euler_step, euler_step_var, kl_increment, kl_increment_var, logw_increment, logw_increment_var,
    transition_log_density,
};

/// Simulates `n_paths` scalar paths of `dX = drift(X) dt + diff dW` from
/// `x0` with `n_steps` Euler–Maruyama steps and returns the end points.
pub fn simulate_scalar_endpoints(
    x0: f64,
    drift: impl Fn(f64) -> f64,
    diff: f64,
    dt: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Vec<f64> {
    let sq = dt.sqrt();
    (0..n_paths as u64)
        .map(|p| {
            let mut rng = noise::sample_rng(seed, p, 0);
            let mut x = x0;
            for _ in 0..n_steps {
                x += drift(x) * dt + diff * sq * noise::standard_normal(&mut rng);
            }
            x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_moments_match_closed_form() {
        let (x0, sigma) = (1.5, 0.8);
        let ends = simulate_scalar_endpoints(x0, |x| -x, sigma, 0.01, 100, 100_000, 5);
        let n = ends.len() as f64;
        let mean = ends.iter().sum::<f64>() / n;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let want_mean = x0 * (-1f64).exp();
        let want_var = sigma * sigma * (1.0 - (-2f64).exp()) / 2.0;
        assert!((mean - want_mean).abs() < 3.0 * se, "mean {mean} want {want_mean} se {se}");
        assert!((var / want_var - 1.0).abs() < 0.05, "var {var} want {want_var}");
    }
}
