use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{fit_norm_stats, normalize, NormStats, TimeSeries};
use crate::error::{Error, Result};
use crate::sde::noise::derive_seed;

/// Train / validation / test partition by whole sequences.
#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub train: Vec<TimeSeries>,
    pub val: Vec<TimeSeries>,
    pub test: Vec<TimeSeries>,
}

impl Splits {
    /// Normalizes all three splits with statistics fitted on `train`.
    pub fn normalize(&mut self) -> Result<NormStats> {
        let stats = fit_norm_stats(&self.train)?;
        normalize(&mut self.train, &stats)?;
        normalize(&mut self.val, &stats)?;
        normalize(&mut self.test, &stats)?;
        Ok(stats)
    }
}

/// Seeded shuffle followed by a split with the given train and validation
/// fractions; the remainder is the test split.
pub fn split_dataset(mut series: Vec<TimeSeries>, train_frac: f64, val_frac: f64, seed: u64) -> Result<Splits> {
    if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac <= 1.0) {
        return Err(Error::config(format!("invalid split fractions {train_frac}/{val_frac}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5b1]));
    series.shuffle(&mut rng);
    let n = series.len();
    let n_train = (train_frac * n as f64).round() as usize;
    let n_val = ((val_frac * n as f64).round() as usize).min(n - n_train);
    let test = series.split_off(n_train + n_val);
    let val = series.split_off(n_train);
    Ok(Splits { train: series, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn seventy_fifteen_fifteen() {
        let data: Vec<_> = (0..100).map(|i| TimeSeries::dense(i, vec![0.0], Array2::ones((1, 1))).unwrap()).collect();
        let s = split_dataset(data.clone(), 0.7, 0.15, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 15, 15));
        let again = split_dataset(data, 0.7, 0.15, 3).unwrap();
        assert_eq!(s.test, again.test);
    }
}
