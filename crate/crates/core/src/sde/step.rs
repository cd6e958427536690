//! Per-interval quantities of the Euler–Maruyama discretization with a
//! diagonal diffusion.
//!
//! On an interval of length `dt` the discretized SDE is
//! `X' = X + H dt + R sqrt(dt) eps`, so `X' | X ~ N(X + H dt, dt R^2)`.
//! Two drifts `H_q`, `H_g` sharing the diffusion `R` give the per-interval
//! KL divergence `1/2 dt sum_j ((H_q - H_g)_j / R_j)^2` and the log
//! importance-weight increment `log p_g(X'|X) - log p_q(X'|X)` along a path
//! generated with `H_q`.

use crate::autodiff::Var;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_dims(parts: &[&[f64]]) -> Result<usize> {
    let n = parts[0].len();
    if parts.iter().any(|p| p.len() != n) {
        return Err(Error::contract("dimension mismatch between step inputs"));
    }
    Ok(n)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::contract(format!("interval length must be positive, got {dt}")));
    }
    Ok(())
}

fn check_diffusion(diff: &[f64]) -> Result<()> {
    if let Some((j, r)) = diff.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::contract(format!("diffusion entry {j} is {r}, must be positive")));
    }
    Ok(())
}

/// One Euler–Maruyama step `x + drift dt + diff * sqrt(dt) * eps`.
/// `node` is reported if any input or the result is non-finite.
pub fn euler_step(x: &[f64], drift: &[f64], diff: &[f64], dt: f64, eps: &[f64], node: usize) -> Result<Vec<f64>> {
    check_dims(&[x, drift, diff, eps])?;
    check_dt(dt)?;
    check_diffusion(diff)?;
    let sq = dt.sqrt();
    let out: Vec<f64> = (0..x.len()).map(|j| x[j] + drift[j] * dt + diff[j] * sq * eps[j]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFault { node });
    }
    Ok(out)
}

/// Log-density of `x_next` under `N(x + drift dt, dt diff^2)` (diagonal).
pub fn transition_log_density(x_next: &[f64], x: &[f64], drift: &[f64], diff: &[f64], dt: f64) -> Result<f64> {
    check_dims(&[x_next, x, drift, diff])?;
    check_dt(dt)?;
    check_diffusion(diff)?;
    let mut lp = 0.0;
    for j in 0..x.len() {
        let var = dt * diff[j] * diff[j];
        let r = x_next[j] - x[j] - drift[j] * dt;
        lp -= 0.5 * (LN_2PI + var.ln() + r * r / var);
    }
    Ok(lp)
}

/// KL divergence between the posterior and prior transition on one interval.
pub fn kl_increment(h_q: &[f64], h_g: &[f64], r_g: &[f64], dt: f64) -> Result<f64> {
    check_dims(&[h_q, h_g, r_g])?;
    check_dt(dt)?;
    check_diffusion(r_g)?;
    let s: f64 = (0..h_q.len()).map(|j| ((h_q[j] - h_g[j]) / r_g[j]).powi(2)).sum();
    Ok(0.5 * s * dt)
}

/// Increment of `log w` on one interval of a posterior path driven by `eps`.
pub fn logw_increment(h_q: &[f64], h_g: &[f64], r_g: &[f64], dt: f64, eps: &[f64]) -> Result<f64> {
    check_dims(&[h_q, h_g, r_g, eps])?;
    let kl = kl_increment(h_q, h_g, r_g, dt)?;
    let sq = dt.sqrt();
    let ito: f64 = (0..h_q.len()).map(|j| (h_q[j] - h_g[j]) / r_g[j] * sq * eps[j]).sum();
    Ok(-kl - ito)
}

/// Batched Euler–Maruyama step on the tape; rows are independent paths.
/// `diff` may have one row per path or broadcast from a single row.
pub fn euler_step_var<'t>(x: &Var<'t>, drift: &Var<'t>, diff: &Var<'t>, dt: f64, eps: &Var<'t>) -> Var<'t> {
    let noise = diff.mul(&eps.scale(dt.sqrt()));
    x.add(&drift.scale(dt)).add(&noise)
}

/// Batched KL increments, `R x 1`. Takes the reciprocal diffusion `1 / r`.
pub fn kl_increment_var<'t>(h_q: &Var<'t>, h_g: &Var<'t>, inv_r: &Var<'t>, dt: f64) -> Var<'t> {
    h_q.sub(h_g).mul(inv_r).square().sum_cols().scale(0.5 * dt)
}

/// Batched log-weight increments, `R x 1`, returned together with the KL
/// increments they contain.
pub fn logw_increment_var<'t>(
    h_q: &Var<'t>,
    h_g: &Var<'t>,
    inv_r: &Var<'t>,
    dt: f64,
    eps: &Var<'t>,
) -> (Var<'t>, Var<'t>) {
    let d = h_q.sub(h_g).mul(inv_r);
    let kl = d.square().sum_cols().scale(0.5 * dt);
    let ito = d.mul(eps).sum_cols().scale(dt.sqrt());
    (kl.add(&ito).neg(), kl)
}
