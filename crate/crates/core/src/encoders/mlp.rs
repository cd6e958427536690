use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Mat, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Exp,
}

/// Layer widths from input to output plus activations.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, output: OutputActivation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::config(format!("MLP widths {widths:?} need at least two positive entries")));
        }
        Ok(MlpSpec { widths, activation, output })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Feed-forward network whose parameters live in a [`ParamStore`].
///
/// The first weight matrix may be stored in row blocks (`input_split`), one
/// per input part, so a caller can project the parts separately and add
/// them; this equals the product with the concatenated input.
#[derive(Clone, Debug)]
pub struct Mlp {
    spec: MlpSpec,
    split: Vec<usize>,
    first: Vec<ParamId>,
    rest: Vec<ParamId>,
    biases: Vec<ParamId>,
}

pub(crate) fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

impl Mlp {
    pub fn new(store: &mut ParamStore, prefix: &str, spec: MlpSpec, rng: &mut ChaCha8Rng) -> Self {
        let split = vec![spec.input_width()];
        Self::with_split(store, prefix, spec, &split, rng)
    }

    /// `split` lists the widths of the input parts and must sum to the
    /// input width.
    pub fn with_split(store: &mut ParamStore, prefix: &str, spec: MlpSpec, split: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(split.iter().sum::<usize>(), spec.input_width(), "input split does not cover the input width");
        let w = &spec.widths;
        let full = glorot(rng, w[0], w[1]);
        let mut first = Vec::new();
        let mut at = 0;
        for (i, &k) in split.iter().enumerate() {
            let name = if split.len() == 1 { format!("{prefix}.w0") } else { format!("{prefix}.w0.{i}") };
            first.push(store.add(name, full.slice(ndarray::s![at..at + k, ..]).to_owned()));
            at += k;
        }
        let mut rest = Vec::new();
        let mut biases = vec![store.add(format!("{prefix}.b0"), Array2::zeros((1, w[1])))];
        for l in 1..w.len() - 1 {
            rest.push(store.add(format!("{prefix}.w{l}"), glorot(rng, w[l], w[l + 1])));
            biases.push(store.add(format!("{prefix}.b{l}"), Array2::zeros((1, w[l + 1]))));
        }
        Mlp { spec, split: split.to_vec(), first, rest, biases }
    }

    /// Multiplies the output layer's weights by `factor`.
    pub fn scale_output(&self, store: &mut ParamStore, factor: f64) {
        let id = self.rest.last().copied().unwrap_or_else(|| *self.first.last().expect("mlp has a first layer"));
        let ids = if self.rest.is_empty() { self.first.clone() } else { vec![id] };
        for id in ids {
            store.get_mut(id).mapv_inplace(|v| v * factor);
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// Parameter ids in creation order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.first.clone();
        for l in 0..self.biases.len() {
            ids.push(self.biases[l]);
            if l < self.rest.len() {
                ids.push(self.rest[l]);
            }
        }
        ids
    }

    /// Full forward pass on rows of `x`.
    pub fn forward<'t>(&self, p: &[Var<'t>], x: &Var<'t>) -> Result<Var<'t>> {
        if x.cols() != self.spec.input_width() {
            return Err(Error::contract(format!(
                "MLP expects input width {}, got {}",
                self.spec.input_width(),
                x.cols()
            )));
        }
        let mut pre = self.bias0(p);
        let mut at = 0;
        for (i, &k) in self.split.iter().enumerate() {
            let part = if self.split.len() == 1 { x.clone() } else { x.slice_cols(at, k) };
            pre = self.project(p, i, &part).add(&pre);
            at += k;
        }
        Ok(self.finish(p, &pre))
    }

    /// `part · W0[part]` without bias.
    pub fn project<'t>(&self, p: &[Var<'t>], part: usize, v: &Var<'t>) -> Var<'t> {
        v.matmul(&p[self.first[part].0])
    }

    pub fn bias0<'t>(&self, p: &[Var<'t>]) -> Var<'t> {
        p[self.biases[0].0].clone()
    }

    /// Remaining layers given the first layer's pre-activation.
    pub fn finish<'t>(&self, p: &[Var<'t>], pre0: &Var<'t>) -> Var<'t> {
        let n_layers = self.spec.widths.len() - 1;
        let mut h = pre0.clone();
        for l in 0..n_layers {
            if l > 0 {
                h = h.matmul(&p[self.rest[l - 1].0]).add(&p[self.biases[l].0]);
            }
            if l + 1 < n_layers {
                h = match self.spec.activation {
                    Activation::Tanh => h.tanh(),
                    Activation::Relu => h.relu(),
                };
            }
        }
        match self.spec.output {
            OutputActivation::Identity => h,
            OutputActivation::Exp => h.exp(),
        }
    }
}
