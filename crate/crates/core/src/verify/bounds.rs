use rayon::prelude::*;

use crate::autodiff::logsumexp;
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::Vsdn;
use crate::sde::noise::derive_seed;

/// Mean and standard error over resamplings of one `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub k: usize,
    pub vae_mean: f64,
    pub vae_se: f64,
    pub iwae_mean: f64,
    pub iwae_se: f64,
}

impl BoundRow {
    pub const CSV_HEADER: &'static str = "k,vae_mean,vae_se,iwae_mean,iwae_se";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.k, self.vae_mean, self.vae_se, self.iwae_mean, self.iwae_se)
    }
}

/// Checks on a bound table.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderingVerdict {
    /// Largest violation of `iwae(K_next) >= iwae(K)` measured in combined
    /// standard errors (negative when every step increases).
    pub worst_decrease_se: f64,
    /// `|iwae(1) - vae(1)|` in combined standard errors, if `K = 1` is present.
    pub k1_gap_se: Option<f64>,
}

impl OrderingVerdict {
    pub fn passes(&self, ordering_se: f64, k1_se: f64) -> bool {
        self.worst_decrease_se <= ordering_se && self.k1_gap_se.is_none_or(|g| g <= k1_se)
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// For every `K` in `k_list`, `n_mc` independent resamplings of `K`
/// posterior paths per series; each resampling's bounds are summed over
/// `series`.
pub fn bound_ordering_sweep(model: &Vsdn, series: &[TimeSeries], k_list: &[usize], n_mc: usize, seed: u64) -> Result<Vec<BoundRow>> {
    if k_list.is_empty() || k_list.contains(&0) || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(format!("K list {k_list:?} must be strictly ascending and positive")));
    }
    if n_mc < 100 {
        return Err(Error::config(format!("n_mc must be at least 100, got {n_mc}")));
    }
    if series.is_empty() {
        return Err(Error::config("bound sweep needs at least one series"));
    }
    let beta = model.config().beta;
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let kseed = derive_seed(seed, &[k as u64]);
        let per_series: Vec<(Vec<f64>, Vec<f64>)> = series
            .par_iter()
            .map(|s| -> Result<(Vec<f64>, Vec<f64>)> {
                let (recon, kl, logw) = model.sample_bound_terms(s, k * n_mc, kseed)?;
                let mut vae = Vec::with_capacity(n_mc);
                let mut iwae = Vec::with_capacity(n_mc);
                for m in 0..n_mc {
                    let r = m * k..(m + 1) * k;
                    vae.push(r.clone().map(|i| recon[i] - beta * kl[i]).sum::<f64>() / k as f64);
                    let terms: Vec<f64> = r.map(|i| recon[i] + logw[i]).collect();
                    iwae.push(logsumexp(&terms)? - (k as f64).ln());
                }
                Ok((vae, iwae))
            })
            .collect::<Result<_>>()?;
        let mut vae = vec![0.0; n_mc];
        let mut iwae = vec![0.0; n_mc];
        for (v, w) in &per_series {
            for m in 0..n_mc {
                vae[m] += v[m];
                iwae[m] += w[m];
            }
        }
        let (vae_mean, vae_se) = mean_se(&vae);
        let (iwae_mean, iwae_se) = mean_se(&iwae);
        rows.push(BoundRow { k, vae_mean, vae_se, iwae_mean, iwae_se });
    }
    Ok(rows)
}

/// Ordering and `K = 1` equality checks in units of standard error.
pub fn assess_ordering(rows: &[BoundRow]) -> OrderingVerdict {
    let worst_decrease_se = rows
        .windows(2)
        .map(|w| {
            let se = combined(w[0].iwae_se, w[1].iwae_se);
            let drop = w[0].iwae_mean - w[1].iwae_mean;
            if se > 0.0 { drop / se } else if drop > 0.0 { f64::INFINITY } else { 0.0 }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let k1_gap_se = rows.iter().find(|r| r.k == 1).map(|r| {
        let gap = (r.iwae_mean - r.vae_mean).abs();
        let se = combined(r.iwae_se, r.vae_se);
        if se > 0.0 { gap / se } else if gap > 0.0 { f64::INFINITY } else { 0.0 }
    });
    OrderingVerdict { worst_decrease_se: if rows.len() < 2 { 0.0 } else { worst_decrease_se }, k1_gap_se }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, iwae_mean: f64, iwae_se: f64) -> BoundRow {
        BoundRow { k, vae_mean: -10.0, vae_se: 0.1, iwae_mean, iwae_se }
    }

    #[test]
    fn increasing_means_pass() {
        let v = assess_ordering(&[row(1, -10.05, 0.1), row(5, -9.0, 0.1), row(25, -8.5, 0.1)]);
        assert!(v.worst_decrease_se < 0.0);
        assert!(v.passes(3.0, 4.0));
    }

    #[test]
    fn significant_drop_fails() {
        let v = assess_ordering(&[row(1, -10.0, 0.1), row(5, -11.0, 0.1)]);
        assert!(v.worst_decrease_se > 7.0);
        assert!(!v.passes(3.0, 4.0));
    }

    #[test]
    fn validates_inputs() {
        let model = Vsdn::new(Default::default(), 0).unwrap();
        assert!(bound_ordering_sweep(&model, &[], &[1, 5], 100, 0).is_err());
        let s = TimeSeries::dense(0, vec![0.0, 0.1], ndarray::array![[0.0, 0.0], [0.1, 0.1]]).unwrap();
        assert!(bound_ordering_sweep(&model, std::slice::from_ref(&s), &[5, 1], 100, 0).is_err());
        assert!(bound_ordering_sweep(&model, &[s], &[1], 10, 0).is_err());
    }
}
