//! Three Euler–Maruyama steps of a scalar SDE with constant drift `phi`
//! and loss `L = X_3`, differentiated through the tape and compared with
//! hand-expanded chain-rule expressions.
//!
//! * Case A, state-free diffusion `R = theta`:
//!   `dL/dphi = 3 dt`, `dL/dtheta = sqrt(dt) (e1 + e2 + e3)`.
//! * Case B, state-dependent diffusion `R = theta X`, with
//!   `a_n = 1 + theta sqrt(dt) e_n`:
//!   `dL/dphi = dt (1 + a3 + a3 a2)`,
//!   `dL/dtheta = sqrt(dt) (X2 e3 + a3 X1 e2 + a3 a2 X0 e1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{ParamStore, Tape};
use crate::error::{Error, Result};
use crate::sde::noise::{derive_seed, sample_rng, standard_normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionCase {
    StateFree,
    StateDependent,
}

/// Gradients of `X_3` with respect to `(phi, theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiTheta {
    pub phi: f64,
    pub theta: f64,
}

/// Tape gradients of the three-step loss.
pub fn autodiff_gradients(case: DiffusionCase, x0: f64, phi: f64, theta: f64, dt: f64, eps: [f64; 3]) -> Result<PhiTheta> {
    let mut store = ParamStore::new();
    let phi_id = store.add("phi", ndarray::arr2(&[[phi]]));
    let theta_id = store.add("theta", ndarray::arr2(&[[theta]]));
    let tape = Tape::new();
    let p = tape.bind(&store);
    let sq = dt.sqrt();
    let mut x = tape.scalar(x0);
    for e in eps {
        let diff = match case {
            DiffusionCase::StateFree => p[theta_id.0].clone(),
            DiffusionCase::StateDependent => p[theta_id.0].mul(&x),
        };
        x = x.add(&p[phi_id.0].scale(dt)).add(&diff.scale(sq * e));
    }
    let g = tape.backward(&x, &store)?;
    Ok(PhiTheta { phi: g.by_id(phi_id)[[0, 0]], theta: g.by_id(theta_id)[[0, 0]] })
}

/// The hand-expanded gradients.
pub fn closed_form_gradients(case: DiffusionCase, x0: f64, theta: f64, phi: f64, dt: f64, eps: [f64; 3]) -> PhiTheta {
    let sq = dt.sqrt();
    match case {
        DiffusionCase::StateFree => PhiTheta { phi: dt + dt + dt, theta: sq * (eps[0] + eps[1] + eps[2]) },
        DiffusionCase::StateDependent => {
            let a = |e: f64| 1.0 + theta * sq * e;
            let (a2, a3) = (a(eps[1]), a(eps[2]));
            let x1 = x0 + phi * dt + theta * x0 * sq * eps[0];
            let x2 = x1 + phi * dt + theta * x1 * sq * eps[1];
            PhiTheta {
                phi: dt * (1.0 + a3 + a3 * a2),
                theta: sq * (x2 * eps[2] + a3 * x1 * eps[1] + a3 * a2 * x0 * eps[0]),
            }
        }
    }
}

/// Outcome of the full experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseInjectionReport {
    pub draws: usize,
    /// Largest `|autodiff - closed form|` over random draws, both cases and
    /// both parameters.
    pub max_abs_err: f64,
    pub redraws: usize,
    /// Sample variances of `dL/dphi` and `dL/dtheta` over noise redraws at
    /// fixed parameters.
    pub state_free_phi_var: f64,
    pub state_free_theta_var: f64,
    pub state_dependent_phi_var: f64,
    pub state_dependent_theta_var: f64,
}

impl NoiseInjectionReport {
    pub const CSV_HEADER: &'static str = "metric,value";

    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_err <= tol && self.state_free_phi_var == 0.0 && self.state_dependent_phi_var > 0.0
    }

    pub fn csv_rows(&self) -> Vec<String> {
        vec![
            format!("draws,{}", self.draws),
            format!("max_abs_err,{:e}", self.max_abs_err),
            format!("redraws,{}", self.redraws),
            format!("state_free_phi_var,{:e}", self.state_free_phi_var),
            format!("state_free_theta_var,{:e}", self.state_free_theta_var),
            format!("state_dependent_phi_var,{:e}", self.state_dependent_phi_var),
            format!("state_dependent_theta_var,{:e}", self.state_dependent_theta_var),
        ]
    }
}

/// Welford's running variance; exactly zero for constant input.
fn variance(v: &[f64]) -> f64 {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in v.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    m2 / (v.len() - 1) as f64
}

/// Agreement over `draws` random `(x0, theta, phi, eps, dt)` with
/// `dt` in `[1e-3, 0.25]`, then gradient variances over `redraws` noise
/// draws at `(dt, theta, phi)`.
pub fn noise_injection_experiment(dt: f64, theta: f64, phi: f64, draws: usize, redraws: usize, seed: u64) -> Result<NoiseInjectionReport> {
    if !(dt > 0.0) || draws == 0 || redraws < 2 {
        return Err(Error::config("need dt > 0, at least one draw and two redraws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xb0]));
    let mut max_abs_err: f64 = 0.0;
    for _ in 0..draws {
        let x0 = rng.random_range(-2.0..2.0);
        let th = rng.random_range(-2.0..2.0);
        let ph = rng.random_range(-2.0..2.0);
        let h = rng.random_range(1e-3..0.25);
        let eps = [standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng)];
        for case in [DiffusionCase::StateFree, DiffusionCase::StateDependent] {
            let a = autodiff_gradients(case, x0, ph, th, h, eps)?;
            let c = closed_form_gradients(case, x0, th, ph, h, eps);
            max_abs_err = max_abs_err.max((a.phi - c.phi).abs()).max((a.theta - c.theta).abs());
        }
    }
    let grads = |case: DiffusionCase| -> Result<(Vec<f64>, Vec<f64>)> {
        let all: Vec<PhiTheta> = (0..redraws as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = sample_rng(derive_seed(seed, &[0xb1]), i, 0);
                let eps = [standard_normal(&mut r), standard_normal(&mut r), standard_normal(&mut r)];
                autodiff_gradients(case, 1.0, phi, theta, dt, eps)
            })
            .collect::<Result<_>>()?;
        Ok((all.iter().map(|g| g.phi).collect(), all.iter().map(|g| g.theta).collect()))
    };
    let (a_phi, a_theta) = grads(DiffusionCase::StateFree)?;
    let (b_phi, b_theta) = grads(DiffusionCase::StateDependent)?;
    Ok(NoiseInjectionReport {
        draws,
        max_abs_err,
        redraws,
        state_free_phi_var: variance(&a_phi),
        state_free_theta_var: variance(&a_theta),
        state_dependent_phi_var: variance(&b_phi),
        state_dependent_theta_var: variance(&b_theta),
    })
}
