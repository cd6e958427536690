use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore, Var};
use crate::encoders::mlp::glorot;
use crate::error::{Error, Result};

/// Gated recurrent unit:
///
/// ```text
/// z = sigmoid(x Wz + h Uz + bz)      r = sigmoid(x Wr + h Ur + br)
/// n = tanh(x Wn + (r * h) Un + bn)   h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug)]
pub struct GruCell {
    input: usize,
    hidden: usize,
    w: [ParamId; 3],
    u: [ParamId; 3],
    b: [ParamId; 3],
}

impl GruCell {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let gates = ["z", "r", "n"];
        let w = gates.map(|g| store.add(format!("{prefix}.w{g}"), glorot(rng, input, hidden)));
        let u = gates.map(|g| store.add(format!("{prefix}.u{g}"), glorot(rng, hidden, hidden)));
        let b = gates.map(|g| store.add(format!("{prefix}.b{g}"), Array2::zeros((1, hidden))));
        GruCell { input, hidden, w, u, b }
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn update<'t>(&self, p: &[Var<'t>], h: &Var<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        if h.cols() != self.hidden || x.cols() != self.input || h.rows() != x.rows() {
            return Err(Error::contract(format!(
                "GRU expects hidden {} and input {}, got {}x{} and {}x{}",
                self.hidden,
                self.input,
                h.rows(),
                h.cols(),
                x.rows(),
                x.cols()
            )));
        }
        let gate = |g: usize, hh: &Var<'t>| x.matmul(&p[self.w[g].0]).add(&hh.matmul(&p[self.u[g].0])).add(&p[self.b[g].0]);
        let z = gate(0, h).sigmoid();
        let r = gate(1, h).sigmoid();
        let n = gate(2, &r.mul(h)).tanh();
        // h' = n + z * (h - n)
        Ok(n.add(&z.mul(&h.sub(&n))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn zero_parameters_halve_the_state() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 4, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let n = store.num_scalars();
        store.set_flat(&vec![0.0; n]);
        let tape = Tape::no_grad();
        let p = tape.bind(&store);
        let h = tape.constant(array![[1.0, -2.0, 0.5]]);
        let out = cell.update(&p, &h, &tape.row(&[3.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(out.value(), &array![[0.5, -1.0, 0.25]]);
    }

    #[test]
    fn repeated_update_is_deterministic() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 2, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let tape = Tape::no_grad();
        let p = tape.bind(&store);
        let h = tape.row(&[0.1, 0.2, 0.3]);
        let x = tape.row(&[1.0, 1.0]);
        let a = cell.update(&p, &h, &x).unwrap();
        let b = cell.update(&p, &h, &x).unwrap();
        assert_eq!(a.value(), b.value());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 2, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let tape = Tape::no_grad();
        let p = tape.bind(&store);
        assert!(cell.update(&p, &tape.row(&[0.0; 3]), &tape.row(&[0.0; 5])).is_err());
    }
}
