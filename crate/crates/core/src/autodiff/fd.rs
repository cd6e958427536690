use crate::error::{Error, Result};

/// Central finite differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every
/// coordinate of `x`.
pub fn finite_diff_oracle<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Oracle(i));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_diff_oracle(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_oracle(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reports_offending_coordinate() {
        let err = finite_diff_oracle(|x| if x[1] > 1.0 { f64::NAN } else { 0.0 }, &[0.0, 1.0], 1e-5);
        assert!(matches!(err, Err(Error::Oracle(1))));
    }
}
