use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde::noise::{sample_rng, standard_normal};
use crate::sde::{euler_step, kl_increment, transition_log_density};

/// Analytic and Monte-Carlo path KL for constant scalar drifts.
#[derive(Clone, Debug, PartialEq)]
pub struct KlOracleReport {
    pub h_q: f64,
    pub h_g: f64,
    pub r_g: f64,
    pub analytic: f64,
    pub mc: f64,
    pub std_err: f64,
}

impl KlOracleReport {
    pub const CSV_HEADER: &'static str = "h_q,h_g,r_g,analytic_kl,mc_kl,std_err,rel_err";

    /// `|analytic - mc| / analytic`; zero when both vanish.
    pub fn rel_err(&self) -> f64 {
        let diff = (self.analytic - self.mc).abs();
        if self.analytic == 0.0 {
            if diff == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            diff / self.analytic
        }
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{},{}", self.h_q, self.h_g, self.r_g, self.analytic, self.mc, self.std_err, self.rel_err())
    }
}

/// Compares `sum_k KL increment` with the mean over `n_paths` posterior
/// paths of the summed transition log-density ratio `log q - log g`.
pub fn kl_mc_oracle(h_q: f64, h_g: f64, r_g: f64, horizon: f64, dt: f64, n_paths: usize, seed: u64) -> Result<KlOracleReport> {
    if !(r_g > 0.0) {
        return Err(Error::config(format!("diffusion must be positive, got {r_g}")));
    }
    if !(dt > 0.0 && horizon > 0.0) || n_paths < 2 {
        return Err(Error::config("need dt > 0, horizon > 0 and at least two paths"));
    }
    let steps = (horizon / dt).round() as usize;
    let step_dt = horizon / steps as f64;
    let (hq, hg, r) = ([h_q], [h_g], [r_g]);
    let analytic = kl_increment(&hq, &hg, &r, step_dt)? * steps as f64;
    let per_path: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| -> Result<f64> {
            let mut rng = sample_rng(seed, p, 0);
            let mut x = [0.0];
            let mut total = 0.0;
            for i in 0..steps {
                let eps = [standard_normal(&mut rng)];
                let next = euler_step(&x, &hq, &r, step_dt, &eps, i + 1)?;
                total += transition_log_density(&next, &x, &hq, &r, step_dt)? - transition_log_density(&next, &x, &hg, &r, step_dt)?;
                x = [next[0]];
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mc = per_path.iter().sum::<f64>() / n;
    let var = per_path.iter().map(|v| (v - mc).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(KlOracleReport { h_q, h_g, r_g, analytic, mc, std_err: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_drifts_give_exact_zero() {
        let r = kl_mc_oracle(0.7, 0.7, 1.3, 1.0, 1e-2, 50, 3).unwrap();
        assert_eq!(r.analytic, 0.0);
        assert_eq!(r.mc, 0.0);
        assert_eq!(r.rel_err(), 0.0);
    }

    #[test]
    fn analytic_scales_with_inverse_square_diffusion() {
        let a = kl_mc_oracle(1.0, 0.0, 1.0, 1.0, 1e-2, 2, 0).unwrap().analytic;
        let b = kl_mc_oracle(1.0, 0.0, 2.0, 1.0, 1e-2, 2, 0).unwrap().analytic;
        assert!((a - 0.5).abs() < 1e-12);
        assert!((b - 0.125).abs() < 1e-12);
    }

    #[test]
    fn unit_gap_mc_agrees_within_four_std_errors() {
        let r = kl_mc_oracle(1.0, 0.0, 1.0, 1.0, 1e-2, 4000, 11).unwrap();
        assert!((r.mc - r.analytic).abs() < 4.0 * r.std_err, "{r:?}");
    }

    #[test]
    fn rejects_nonpositive_diffusion() {
        assert!(matches!(kl_mc_oracle(1.0, 0.0, 0.0, 1.0, 1e-2, 10, 0), Err(Error::Config(_))));
    }
}
