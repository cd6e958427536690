use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_diff_oracle, Tape};
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::{series_grid, Batch, Vsdn};
use crate::objectives::LossKind;
use crate::sde::noise::{derive_seed, standard_normal};
use crate::sde::{euler_step, logw_increment, simulate_scalar_endpoints, transition_log_density};

/// Largest `|logw increment - (log g - log q)|` over random steps, where
/// both transition densities are evaluated at the Euler step driven by
/// the posterior drift.
pub fn logw_identity_check(n_steps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x10c]));
    let mut worst: f64 = 0.0;
    for i in 0..n_steps {
        let d = rng.random_range(1..=4);
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(lo..hi)).collect() };
        let x = draw(-2.0, 2.0);
        let h_q = draw(-2.0, 2.0);
        let h_g = draw(-2.0, 2.0);
        let r = draw(0.5, 2.0);
        let dt = rng.random_range(1e-3..0.25);
        let eps: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let next = euler_step(&x, &h_q, &r, dt, &eps, i)?;
        let ratio = transition_log_density(&next, &x, &h_g, &r, dt)? - transition_log_density(&next, &x, &h_q, &r, dt)?;
        worst = worst.max((logw_increment(&h_q, &h_g, &r, dt, &eps)? - ratio).abs());
    }
    Ok(worst)
}

/// Two observations 0.05 apart, the second missing its second dimension.
pub fn toy_series() -> Result<TimeSeries> {
    TimeSeries::new(
        0,
        vec![0.0, 0.05],
        ndarray::array![[0.3, -0.2], [0.1, 0.0]],
        ndarray::array![[true, true], [true, false]],
    )
}

/// Tape gradient against central differences for the VAE loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_err: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub loss: f64,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares the tape gradient of the VAE training loss of `series`
/// (fixed noise from `seed`, `k` samples) with central differences of
/// step `h` over every parameter.
pub fn gradient_check(model: &Vsdn, series: &TimeSeries, k: usize, seed: u64, h: f64, floor: f64) -> Result<GradCheckReport> {
    let batch = Batch::new(&[series], model.config().max_dt)?;
    let tape = Tape::new();
    let p = tape.bind(model.store());
    let out = model.batch_loss(&p, &tape, &batch, LossKind::Vae, k, seed)?;
    let loss = out.loss.scalar();
    let analytic = tape.backward(&out.loss, model.store())?.flatten();
    let mut probe = model.clone();
    let x0 = model.store().flatten();
    let numeric = finite_diff_oracle(
        |x| {
            probe.store_mut().set_flat(x);
            let tape = Tape::no_grad();
            let p = tape.bind(probe.store());
            probe.batch_loss(&p, &tape, &batch, LossKind::Vae, k, seed).map(|o| o.loss.scalar()).unwrap_or(f64::NAN)
        },
        &x0,
        h,
    )?;
    let (worst_index, max_rel_err) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &b)| relative_error(a, b, floor))
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    Ok(GradCheckReport { n_params: x0.len(), max_rel_err, worst_index, loss })
}

/// How far the diffusion moves when the latent path is perturbed.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSensitivity {
    pub nodes: usize,
    /// Smallest state change over nodes feeding the diffusion (must be
    /// positive for the check to mean anything).
    pub min_state_change: f64,
    /// Largest diffusion change over all nodes.
    pub max_diffusion_change: f64,
}

/// Compares diffusion values along two different latent paths of the same
/// series: one with seed `seed`, the other with another seed and the
/// initial latent state shifted by `shift`.
pub fn diffusion_state_sensitivity(model: &Vsdn, series: &TimeSeries, shift: f64, seed: u64) -> Result<DiffusionSensitivity> {
    let x0 = model.store().id("x0").ok_or_else(|| Error::contract("model has no x0 block"))?;
    let mut moved = model.clone();
    moved.store_mut().get_mut(x0).mapv_inplace(|v| v + shift);
    let other = derive_seed(seed, &[1]);
    let grid = series_grid(series, model.config().max_dt)?;
    let a = model.sample_posterior_paths(series, &grid, 1, seed)?;
    let b = moved.sample_posterior_paths(series, &grid, 1, other)?;
    let da = model.diffusion_trace(series, 1, seed)?;
    let db = moved.diffusion_trace(series, 1, other)?;
    let intervals = grid.intervals();
    let min_state_change = (0..intervals)
        .map(|i| {
            let sa = a.states.slice(ndarray::s![0, i, ..]);
            let sb = b.states.slice(ndarray::s![0, i, ..]);
            sa.iter().zip(sb.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let max_diffusion_change = da
        .iter()
        .zip(&db)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(DiffusionSensitivity { nodes: intervals, min_state_change, max_diffusion_change })
}

/// Result of perturbing unobserved cells before ingestion.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSoundness {
    /// Number of perturbed variants compared (one per unobserved cell plus
    /// one with all of them changed at once).
    pub variants: usize,
    /// Variants whose loss, metrics or encoder output differed in any bit.
    pub mismatches: usize,
}

#[derive(PartialEq)]
struct Fingerprint {
    losses: Vec<u64>,
    scores: Vec<crate::model::FrameScore>,
    forward: crate::encoders::EncoderOutput,
    backward: Option<ndarray::Array2<f64>>,
}

fn fingerprint(model: &Vsdn, series: &TimeSeries, seed: u64) -> Result<Fingerprint> {
    let batch = Batch::new(&[series], model.config().max_dt)?;
    let mut losses = Vec::new();
    for kind in [LossKind::Vae, LossKind::IwaeMixed] {
        let tape = Tape::no_grad();
        let p = tape.bind(model.store());
        losses.push(model.batch_loss(&p, &tape, &batch, kind, model.config().k, seed)?.loss.scalar().to_bits());
    }
    let mut scores = model.predict_sequence(series, 3, seed)?;
    let (observed, held) = crate::data::holdout_frames(series, 0.5, seed)?;
    if let Some(held) = held {
        scores.extend(model.score_interpolation(&observed, &held, 3, seed)?);
    }
    let grid = series_grid(series, model.config().max_dt)?;
    let forward = model.forward_encoder().encode_forward(model.store(), series, &grid)?;
    let backward = model.backward_encoder().map(|b| b.encode_backward(model.store(), series, &grid)).transpose()?;
    Ok(Fingerprint { losses, scores, forward, backward })
}

/// Rebuilds `series` with arbitrary values written into its unobserved
/// cells (one at a time, then all together) and checks that every loss,
/// metric and encoder output is bit-identical to the original's.
pub fn mask_soundness(model: &Vsdn, series: &TimeSeries, seed: u64) -> Result<MaskSoundness> {
    let base = fingerprint(model, series, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x3a5c]));
    let holes: Vec<(usize, usize)> = series.mask().indexed_iter().filter(|(_, &m)| !m).map(|(ij, _)| ij).collect();
    let mut variants: Vec<Vec<(usize, usize)>> = holes.iter().map(|&h| vec![h]).collect();
    if holes.len() > 1 {
        variants.push(holes.clone());
    }
    let mut mismatches = 0;
    for cells in &variants {
        let mut values = series.values().clone();
        for &ij in cells {
            values[ij] = rng.random_range(-1e3..1e3);
        }
        let mutated = TimeSeries::new(series.id(), series.times().to_vec(), values, series.mask().clone())?;
        if fingerprint(model, &mutated, seed)? != base {
            mismatches += 1;
        }
    }
    Ok(MaskSoundness { variants: variants.len(), mismatches })
}

/// Sample moments of `dX = -X dt + sigma dW` at `T = n_steps dt` against
/// the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub want_mean: f64,
    pub var: f64,
    pub want_var: f64,
}

impl EulerMoments {
    pub fn passes(&self, mean_se: f64, var_rel: f64) -> bool {
        (self.mean - self.want_mean).abs() <= mean_se * self.mean_se && (self.var / self.want_var - 1.0).abs() <= var_rel
    }
}

pub fn euler_ou_moments(x0: f64, sigma: f64, dt: f64, n_steps: usize, n_paths: usize, seed: u64) -> EulerMoments {
    let ends = simulate_scalar_endpoints(x0, |x| -x, sigma, dt, n_steps, n_paths, seed);
    let n = ends.len() as f64;
    let mean = ends.iter().sum::<f64>() / n;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = dt * n_steps as f64;
    EulerMoments {
        mean,
        mean_se: (var / n).sqrt(),
        want_mean: x0 * (-t).exp(),
        var,
        want_var: sigma * sigma * (1.0 - (-2.0 * t).exp()) / 2.0,
    }
}
