use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::sde::noise::{derive_seed, sample_rng};

const MAX_REDRAWS: usize = 10_000;

/// Drops each frame with probability `p_time`, then each remaining observed
/// cell with probability `p_dim`. A row whose cells would all vanish has
/// its cell drops redrawn; a frame pattern leaving fewer than two rows is
/// redrawn as a whole.
pub fn sporadify(series: &TimeSeries, p_time: f64, p_dim: f64, seed: u64) -> Result<TimeSeries> {
    if !(0.0..1.0).contains(&p_time) || !(0.0..1.0).contains(&p_dim) {
        return Err(Error::config(format!("drop probabilities must lie in [0, 1), got p_time={p_time}, p_dim={p_dim}")));
    }
    if series.len() < 2 {
        return Err(Error::config(format!("series {} has fewer than two frames", series.id())));
    }
    let mut rng = sample_rng(derive_seed(seed, &[0x5ad]), series.id(), 0);
    let keep = draw_frames(&mut rng, series.len(), p_time)?;
    let d = series.dim();
    let mut mask = Array2::from_elem((keep.len(), d), false);
    for (r, &i) in keep.iter().enumerate() {
        let observed: Vec<usize> = (0..d).filter(|&j| series.mask()[[i, j]]).collect();
        for _ in 0..MAX_REDRAWS {
            let pick: Vec<bool> = observed.iter().map(|_| rng.random::<f64>() >= p_dim).collect();
            if pick.iter().any(|&b| b) {
                for (&j, &b) in observed.iter().zip(&pick) {
                    mask[[r, j]] = b;
                }
                break;
            }
        }
    }
    let times = keep.iter().map(|&i| series.times()[i]).collect();
    let values = series.values().select(ndarray::Axis(0), &keep);
    let mut out = TimeSeries::new(series.id(), times, values, mask)?;
    out.set_norm(series.norm_stats().cloned());
    Ok(out)
}

fn draw_frames(rng: &mut ChaCha8Rng, n: usize, p_time: f64) -> Result<Vec<usize>> {
    for _ in 0..MAX_REDRAWS {
        let keep: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() >= p_time).collect();
        if keep.len() >= 2 {
            return Ok(keep);
        }
    }
    Err(Error::config(format!("p_time={p_time} leaves fewer than two frames out of {n}")))
}

/// [`sporadify`] over a whole dataset.
pub fn sporadify_all(series: &[TimeSeries], p_time: f64, p_dim: f64, seed: u64) -> Result<Vec<TimeSeries>> {
    series.iter().map(|s| sporadify(s, p_time, p_dim, seed)).collect()
}

/// Splits the frames of `series` into an observed part and a held-out part
/// with about `frac` of the frames. The first and last frames stay
/// observed so held-out times never leave the observed span.
pub fn holdout_frames(series: &TimeSeries, frac: f64, seed: u64) -> Result<(TimeSeries, Option<TimeSeries>)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::config(format!("holdout fraction must lie in [0, 1), got {frac}")));
    }
    let n = series.len();
    let mut rng = sample_rng(derive_seed(seed, &[0x401d]), series.id(), 0);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for i in 0..n {
        if i > 0 && i + 1 < n && rng.random::<f64>() < frac {
            held.push(i);
        } else {
            kept.push(i);
        }
    }
    let observed = series.select_rows(&kept)?;
    let held = if held.is_empty() { None } else { Some(series.select_rows(&held)?) };
    Ok((observed, held))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate_double_ou, OuParams, OuSimConfig};

    fn dense(n: usize) -> TimeSeries {
        let times = (0..n).map(|i| i as f64 * 0.01).collect();
        let values = Array2::from_shape_fn((n, 3), |(i, j)| (i * 3 + j) as f64 + 1.0);
        TimeSeries::dense(4, times, values).unwrap()
    }

    #[test]
    fn zero_rates_are_identity() {
        let s = dense(20);
        assert_eq!(sporadify(&s, 0.0, 0.0, 3).unwrap(), s);
    }

    #[test]
    fn half_frame_drop_is_binomial() {
        let s = dense(1000);
        let out = sporadify(&s, 0.5, 0.0, 11).unwrap();
        assert!((out.len() as f64 - 500.0).abs() <= 4.0 * 250f64.sqrt(), "kept {}", out.len());
    }

    #[test]
    fn same_seed_same_pattern() {
        let s = dense(200);
        assert_eq!(sporadify(&s, 0.4, 0.6, 5).unwrap(), sporadify(&s, 0.4, 0.6, 5).unwrap());
        assert_ne!(sporadify(&s, 0.4, 0.6, 5).unwrap().mask(), sporadify(&s, 0.4, 0.6, 6).unwrap().mask());
    }

    #[test]
    fn rows_never_empty_and_at_least_two() {
        let data = simulate_double_ou(&OuParams::default(), &OuSimConfig { n_seq: 50, horizon: 0.3, ..OuSimConfig::default() }, 2).unwrap();
        for s in &data {
            let out = sporadify(s, 0.9, 0.9, 8).unwrap();
            assert!(out.len() >= 2);
            assert!(out.mask().rows().into_iter().all(|r| r.iter().any(|&m| m)));
        }
    }

    #[test]
    fn holdout_keeps_endpoints() {
        let s = dense(50);
        let (obs, held) = holdout_frames(&s, 0.5, 1).unwrap();
        let held = held.unwrap();
        assert_eq!(obs.len() + held.len(), 50);
        assert_eq!(obs.times()[0], 0.0);
        assert_eq!(obs.last_time(), s.last_time());
    }
}
