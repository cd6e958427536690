use crate::data::{NormStats, TimeSeries};
use crate::error::{Error, Result};

/// Per-dimension mean and standard deviation over observed cells only.
pub fn fit_norm_stats(train: &[TimeSeries]) -> Result<NormStats> {
    let d = train.first().map(|s| s.dim()).ok_or_else(|| Error::config("cannot fit statistics on an empty split"))?;
    let mut n = vec![0usize; d];
    let mut sum = vec![0.0; d];
    for s in train {
        for ((_, j), v) in s.values().indexed_iter().filter(|((i, j), _)| s.mask()[[*i, *j]]) {
            n[j] += 1;
            sum[j] += v;
        }
    }
    let mut mean = vec![0.0; d];
    for j in 0..d {
        if n[j] == 0 {
            return Err(Error::config(format!("dimension {} has no observations in the training split", j + 1)));
        }
        mean[j] = sum[j] / n[j] as f64;
    }
    let mut ss = vec![0.0; d];
    for s in train {
        for ((_, j), v) in s.values().indexed_iter().filter(|((i, j), _)| s.mask()[[*i, *j]]) {
            ss[j] += (v - mean[j]).powi(2);
        }
    }
    let mut std = vec![0.0; d];
    for j in 0..d {
        std[j] = (ss[j] / n[j] as f64).sqrt();
        if !(std[j] > 0.0) {
            return Err(Error::config(format!("dimension {} has zero standard deviation", j + 1)));
        }
    }
    Ok(NormStats { mean, std })
}

/// Applies `stats` to observed cells and records them on each series.
pub fn normalize(series: &mut [TimeSeries], stats: &NormStats) -> Result<()> {
    for s in series.iter_mut() {
        if s.dim() != stats.mean.len() {
            return Err(Error::config(format!("series {} has {} dims, statistics have {}", s.id(), s.dim(), stats.mean.len())));
        }
        let mask = s.mask().clone();
        for ((i, j), v) in s.values_mut().indexed_iter_mut() {
            if mask[[i, j]] {
                *v = (*v - stats.mean[j]) / stats.std[j];
            }
        }
        s.set_norm(Some(stats.clone()));
    }
    Ok(())
}

/// Inverse of [`normalize`]; a no-op on series without statistics.
pub fn denormalize(series: &mut [TimeSeries]) {
    for s in series.iter_mut() {
        let Some(stats) = s.norm_stats().cloned() else { continue };
        let mask = s.mask().clone();
        for ((i, j), v) in s.values_mut().indexed_iter_mut() {
            if mask[[i, j]] {
                *v = *v * stats.std[j] + stats.mean[j];
            }
        }
        s.set_norm(None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn series() -> Vec<TimeSeries> {
        vec![
            TimeSeries::new(0, vec![0.0, 1.0, 2.0], array![[1.0, 10.0], [3.0, 99.0], [5.0, 14.0]], array![[true, true], [true, false], [true, true]]).unwrap(),
            TimeSeries::new(1, vec![0.0, 1.0], array![[2.0, 7.0], [4.0, 12.0]], array![[true, false], [false, true]]).unwrap(),
        ]
    }

    #[test]
    fn masked_mean_becomes_zero() {
        let mut data = series();
        let stats = fit_norm_stats(&data).unwrap();
        assert_eq!(stats.mean, vec![2.75, 12.0]);
        normalize(&mut data, &stats).unwrap();
        let total: f64 = data.iter().map(|s| s.values().sum()).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        let orig = series();
        let mut data = orig.clone();
        let stats = fit_norm_stats(&data).unwrap();
        normalize(&mut data, &stats).unwrap();
        denormalize(&mut data);
        for (a, b) in orig.iter().zip(&data) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_std_names_dimension() {
        let data = vec![TimeSeries::dense(0, vec![0.0, 1.0], array![[1.0, 2.0], [1.5, 2.0]]).unwrap()];
        let err = fit_norm_stats(&data).unwrap_err();
        assert!(err.to_string().contains("dimension 2"), "{err}");
    }
}
