//! Learnable parameter storage, gradient maps and the Adam optimizer.

use std::collections::HashMap;

use ndarray::Array2;

use crate::autodiff::tape::Mat;
use crate::error::{Error, Result};

/// Index of a block inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// One named parameter array with its Adam moment accumulators.
#[derive(Clone, Debug)]
pub struct ParamBlock {
    pub name: String,
    pub value: Mat,
    pub adam_m: Mat,
    pub adam_v: Mat,
}

/// Flat parameter storage in insertion order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
    index: HashMap<String, usize>,
    step_count: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new block. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = self.blocks.len();
        self.index.insert(name.clone(), id);
        let zeros = Array2::zeros(value.dim());
        self.blocks.push(ParamBlock { name, adam_m: zeros.clone(), adam_v: zeros, value });
        ParamId(id)
    }

    /// Restores a block including optimizer state (checkpoint loading).
    pub(crate) fn push_block(&mut self, block: ParamBlock) -> ParamId {
        let id = self.blocks.len();
        self.index.insert(block.name.clone(), id);
        self.blocks.push(block);
        ParamId(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.blocks[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.blocks[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Mat> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamBlock)> {
        self.blocks.iter().enumerate().map(|(i, b)| (ParamId(i), b))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(crate) fn set_step_count(&mut self, n: u64) {
        self.step_count = n;
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.value.len()).sum()
    }

    /// All parameter values concatenated in block order (row-major).
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.value.iter().copied()).collect()
    }

    /// Inverse of [`ParamStore::flatten`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_scalars());
        let mut at = 0;
        for b in &mut self.blocks {
            for v in b.value.iter_mut() {
                *v = flat[at];
                at += 1;
            }
        }
    }
}

/// Gradient of a scalar with respect to every block of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Gradients {
    names: Vec<String>,
    grads: Vec<Mat>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            names: store.blocks.iter().map(|b| b.name.clone()).collect(),
            grads: store.blocks.iter().map(|b| Array2::zeros(b.value.dim())).collect(),
        }
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Mat) {
        self.grads[id.0] += g;
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.names.iter().position(|n| n == name).map(|i| &self.grads[i])
    }

    pub fn by_id(&self, id: ParamId) -> &Mat {
        &self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(self.grads.iter())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.iter().copied()).collect()
    }

    /// Adds `other` into `self` (fixed block order, so summation order is
    /// deterministic).
    pub fn merge(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|x| x * c);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// First block holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.names
            .iter()
            .zip(&self.grads)
            .find(|(_, g)| g.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n.as_str())
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-4 }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.learning_rate, self.beta1, self.beta2, self.epsilon, self.weight_decay]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite
            || self.learning_rate <= 0.0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
            || self.weight_decay < 0.0
        {
            return Err(Error::config(format!("invalid Adam hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// One Adam update with bias correction and decoupled weight decay:
///
/// ```text
/// m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// ```
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, hyper: &AdamHyper) -> Result<()> {
    hyper.validate()?;
    if grads.grads.len() != store.blocks.len() {
        return Err(Error::contract("gradient map does not match parameter store"));
    }
    for (b, g) in store.blocks.iter().zip(&grads.grads) {
        if b.value.dim() != g.dim() {
            return Err(Error::contract(format!("gradient shape mismatch for `{}`", b.name)));
        }
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    store.step_count += 1;
    let t = store.step_count as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let AdamHyper { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps, weight_decay: wd } = *hyper;
    for (b, g) in store.blocks.iter_mut().zip(&grads.grads) {
        ndarray::Zip::from(&mut b.value).and(&mut b.adam_m).and(&mut b.adam_v).and(g).for_each(
            |p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
            },
        );
    }
    Ok(())
}
