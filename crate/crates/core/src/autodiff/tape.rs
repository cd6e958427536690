//! Reverse-mode automatic differentiation over 2-D `f64` arrays.
//!
//! A [`Tape`] records every operation whose inputs depend on a bound
//! parameter. Values that do not depend on parameters (data, noise draws,
//! anything built on a no-grad tape) never touch the tape, so evaluation
//! passes allocate nothing beyond the arrays they compute.
//!
//! Every value is a matrix; scalars are `1 x 1`. Binary elementwise ops
//! broadcast a dimension of length one against the other operand, which
//! covers bias rows (`1 x C`), per-row weights (`R x 1`) and scalars.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{Array2, Axis, Zip};

use crate::autodiff::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

#[derive(Clone, Copy, Debug)]
struct Parent {
    node: Option<usize>,
    shape: (usize, usize),
}

enum Op {
    Leaf,
    Add(Parent, Parent),
    Sub(Parent, Parent),
    Mul(Parent, Parent, Rc<Mat>, Rc<Mat>),
    Scale(usize, f64),
    MatMul(Parent, Parent, Rc<Mat>, Rc<Mat>),
    Tanh(usize, Rc<Mat>),
    Relu(usize, Rc<Mat>),
    Sigmoid(usize, Rc<Mat>),
    Exp(usize, Rc<Mat>),
    Log(usize, Rc<Mat>),
    Softplus(usize, Rc<Mat>),
    Clamp(usize, Rc<Mat>, f64, f64),
    SumAll(usize, (usize, usize)),
    MeanAll(usize, (usize, usize)),
    SumCols(usize, (usize, usize)),
    SumRows(usize, (usize, usize)),
    LogSumExpCols(usize, Rc<Mat>, Rc<Mat>),
    ConcatCols(Vec<(Option<usize>, usize)>),
    SliceCols(usize, usize, (usize, usize)),
    SliceRows(usize, usize, (usize, usize)),
    RepeatRows(usize, usize),
    Reshape(usize, (usize, usize)),
}

/// Recording tape for one forward/backward pass.
pub struct Tape {
    ops: RefCell<Vec<Op>>,
    params: RefCell<Vec<(usize, ParamId)>>,
    recording: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// A tape that records parameter-dependent operations.
    pub fn new() -> Self {
        Tape { ops: RefCell::new(Vec::new()), params: RefCell::new(Vec::new()), recording: true }
    }

    /// A tape on which parameters bind as constants; nothing is recorded.
    pub fn no_grad() -> Self {
        Tape { ops: RefCell::new(Vec::new()), params: RefCell::new(Vec::new()), recording: false }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.ops.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constant(&self, value: Mat) -> Var<'_> {
        Var { tape: self, value: Rc::new(value), node: None }
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }

    /// A `1 x n` row vector.
    pub fn row(&self, values: &[f64]) -> Var<'_> {
        self.constant(Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
    }

    /// Binds a parameter block as a differentiable leaf.
    pub fn param(&self, id: ParamId, value: &Mat) -> Var<'_> {
        if !self.recording {
            return self.constant(value.clone());
        }
        let node = self.push(Op::Leaf);
        self.params.borrow_mut().push((node, id));
        Var { tape: self, value: Rc::new(value.clone()), node: Some(node) }
    }

    /// Binds every block of `store`, indexed by [`ParamId`].
    pub fn bind<'t>(&'t self, store: &ParamStore) -> Vec<Var<'t>> {
        store.iter().map(|(id, block)| self.param(id, &block.value)).collect()
    }

    fn push(&self, op: Op) -> usize {
        let mut ops = self.ops.borrow_mut();
        ops.push(op);
        ops.len() - 1
    }

    fn make<'t>(&'t self, value: Mat, tracked: bool, op: impl FnOnce() -> Op) -> Var<'t> {
        let node = if tracked && self.recording { Some(self.push(op())) } else { None };
        Var { tape: self, value: Rc::new(value), node }
    }

    /// Concatenates along columns; all parts must share a row count.
    pub fn concat_cols<'t>(&'t self, parts: &[&Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat of zero parts");
        let rows = parts[0].rows();
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut out = Array2::zeros((rows, cols));
        let mut at = 0;
        for p in parts {
            assert_eq!(p.rows(), rows, "concat row mismatch");
            out.slice_mut(ndarray::s![.., at..at + p.cols()]).assign(&*p.value);
            at += p.cols();
        }
        let tracked = parts.iter().any(|p| p.node.is_some());
        let spec: Vec<_> = parts.iter().map(|p| (p.node, p.cols())).collect();
        self.make(out, tracked, || Op::ConcatCols(spec))
    }

    /// Reverse pass from a scalar root. Parameters that do not influence
    /// `root` receive zero gradients.
    pub fn backward(&self, root: &Var<'_>, store: &ParamStore) -> Result<Gradients> {
        if root.value.dim() != (1, 1) {
            return Err(Error::contract(format!(
                "backward root must be scalar, got shape {:?}",
                root.value.dim()
            )));
        }
        let mut out = Gradients::zeros_like(store);
        let Some(root_node) = root.node else {
            return Ok(out);
        };
        let ops = self.ops.borrow();
        let mut grads: Vec<Option<Mat>> = Vec::with_capacity(root_node + 1);
        grads.resize_with(root_node + 1, || None);
        grads[root_node] = Some(Array2::ones((1, 1)));

        for i in (0..=root_node).rev() {
            let Some(g) = grads[i].take() else { continue };
            let mut send = |p: usize, d: Mat| -> Result<()> {
                if p >= i {
                    return Err(Error::contract(format!("tape cycle: node {i} feeds from {p}")));
                }
                match &mut grads[p] {
                    Some(acc) => *acc += &d,
                    slot @ None => *slot = Some(d),
                }
                Ok(())
            };
            match &ops[i] {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Add(a, b) => {
                    if let Some(n) = a.node {
                        send(n, unbroadcast(&g, a.shape))?;
                    }
                    if let Some(n) = b.node {
                        send(n, unbroadcast(&g, b.shape))?;
                    }
                }
                Op::Sub(a, b) => {
                    if let Some(n) = a.node {
                        send(n, unbroadcast(&g, a.shape))?;
                    }
                    if let Some(n) = b.node {
                        send(n, -unbroadcast(&g, b.shape))?;
                    }
                }
                Op::Mul(a, b, av, bv) => {
                    if let Some(n) = a.node {
                        send(n, unbroadcast(&zip_bc(&g, bv, |x, y| x * y), a.shape))?;
                    }
                    if let Some(n) = b.node {
                        send(n, unbroadcast(&zip_bc(&g, av, |x, y| x * y), b.shape))?;
                    }
                }
                Op::Scale(a, c) => send(*a, g * *c)?,
                Op::MatMul(a, b, av, bv) => {
                    if let Some(n) = a.node {
                        send(n, g.dot(&bv.t()))?;
                    }
                    if let Some(n) = b.node {
                        send(n, av.t().dot(&g))?;
                    }
                }
                Op::Tanh(a, out) => send(*a, Zip::from(&g).and(&**out).map_collect(|&g, &y| g * (1.0 - y * y)))?,
                Op::Relu(a, inp) => {
                    send(*a, Zip::from(&g).and(&**inp).map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 }))?
                }
                Op::Sigmoid(a, out) => send(*a, Zip::from(&g).and(&**out).map_collect(|&g, &y| g * y * (1.0 - y)))?,
                Op::Exp(a, out) => send(*a, Zip::from(&g).and(&**out).map_collect(|&g, &y| g * y))?,
                Op::Log(a, inp) => send(*a, Zip::from(&g).and(&**inp).map_collect(|&g, &x| g / x))?,
                Op::Softplus(a, inp) => {
                    send(*a, Zip::from(&g).and(&**inp).map_collect(|&g, &x| g * sigmoid(x)))?
                }
                Op::Clamp(a, inp, lo, hi) => send(
                    *a,
                    Zip::from(&g).and(&**inp).map_collect(|&g, &x| if x >= *lo && x <= *hi { g } else { 0.0 }),
                )?,
                Op::SumAll(a, shape) => send(*a, Array2::from_elem(*shape, g[[0, 0]]))?,
                Op::MeanAll(a, shape) => {
                    let n = (shape.0 * shape.1) as f64;
                    send(*a, Array2::from_elem(*shape, g[[0, 0]] / n))?
                }
                Op::SumCols(a, shape) | Op::SumRows(a, shape) => {
                    send(*a, g.broadcast(*shape).unwrap().to_owned())?
                }
                Op::LogSumExpCols(a, inp, out) => {
                    let d = Zip::from(&**inp)
                        .and_broadcast(&**out)
                        .and_broadcast(&g)
                        .map_collect(|&x, &m, &g| g * (x - m).exp());
                    send(*a, d)?
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &(node, w) in parts {
                        if let Some(n) = node {
                            send(n, g.slice(ndarray::s![.., at..at + w]).to_owned())?;
                        }
                        at += w;
                    }
                }
                Op::SliceCols(a, start, shape) => {
                    let mut d = Array2::zeros(*shape);
                    d.slice_mut(ndarray::s![.., *start..*start + g.ncols()]).assign(&g);
                    send(*a, d)?
                }
                Op::SliceRows(a, start, shape) => {
                    let mut d = Array2::zeros(*shape);
                    d.slice_mut(ndarray::s![*start..*start + g.nrows(), ..]).assign(&g);
                    send(*a, d)?
                }
                Op::RepeatRows(a, k) => {
                    let (r, c) = g.dim();
                    let g3 = g.into_shape_with_order((r / k, *k, c)).unwrap();
                    send(*a, g3.sum_axis(Axis(1)))?
                }
                Op::Reshape(a, shape) => send(*a, g.into_shape_with_order(*shape).unwrap())?,
            }
        }

        for &(node, id) in self.params.borrow().iter() {
            if node <= root_node {
                if let Some(g) = grads[node].take() {
                    out.accumulate(id, &g);
                }
            }
        }
        Ok(out)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            panic!("incompatible shapes {a:?} and {b:?}")
        }
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

fn zip_bc(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    if a.dim() == b.dim() {
        return Zip::from(a).and(b).map_collect(|&x, &y| f(x, y));
    }
    let shape = broadcast_shape(a.dim(), b.dim());
    let av = a.broadcast(shape).unwrap();
    let bv = b.broadcast(shape).unwrap();
    Zip::from(&av).and(&bv).map_collect(|&x, &y| f(x, y))
}

fn unbroadcast(g: &Mat, shape: (usize, usize)) -> Mat {
    let mut out = if g.nrows() != shape.0 { g.sum_axis(Axis(0)).insert_axis(Axis(0)) } else { g.clone() };
    if out.ncols() != shape.1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

/// A value computed on a [`Tape`].
///
/// Cloning is cheap: the array is reference counted.
#[derive(Clone)]
pub struct Var<'t> {
    tape: &'t Tape,
    value: Rc<Mat>,
    node: Option<usize>,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("node", &self.node).field("value", &*self.value).finish()
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Mat {
        &self.value
    }

    pub fn into_value(self) -> Mat {
        Rc::try_unwrap(self.value).unwrap_or_else(|rc| (*rc).clone())
    }

    /// The single entry of a `1 x 1` value.
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.value.dim(), (1, 1));
        self.value[[0, 0]]
    }

    pub fn rows(&self) -> usize {
        self.value.nrows()
    }

    pub fn cols(&self) -> usize {
        self.value.ncols()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.is_some()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn parent(&self) -> Parent {
        Parent { node: self.node, shape: self.value.dim() }
    }

    fn unary(&self, value: Mat, op: impl FnOnce(usize) -> Op) -> Var<'t> {
        match self.node {
            Some(n) => self.tape.make(value, true, || op(n)),
            None => self.tape.constant(value),
        }
    }

    fn tracked_with(&self, other: &Var<'t>) -> bool {
        self.node.is_some() || other.node.is_some()
    }

    pub fn add(&self, other: &Var<'t>) -> Var<'t> {
        let v = zip_bc(&self.value, &other.value, |x, y| x + y);
        self.tape.make(v, self.tracked_with(other), || Op::Add(self.parent(), other.parent()))
    }

    pub fn sub(&self, other: &Var<'t>) -> Var<'t> {
        let v = zip_bc(&self.value, &other.value, |x, y| x - y);
        self.tape.make(v, self.tracked_with(other), || Op::Sub(self.parent(), other.parent()))
    }

    pub fn mul(&self, other: &Var<'t>) -> Var<'t> {
        let v = zip_bc(&self.value, &other.value, |x, y| x * y);
        self.tape.make(v, self.tracked_with(other), || {
            Op::Mul(self.parent(), other.parent(), self.value.clone(), other.value.clone())
        })
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(&*self.value * c, |n| Op::Scale(n, c))
    }

    pub fn neg(&self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn square(&self) -> Var<'t> {
        self.mul(self)
    }

    /// Adds a constant to every entry.
    pub fn add_scalar(&self, c: f64) -> Var<'t> {
        self.add(&self.tape.scalar(c))
    }

    pub fn matmul(&self, other: &Var<'t>) -> Var<'t> {
        assert_eq!(self.cols(), other.rows(), "matmul shape mismatch");
        let v = self.value.dot(&*other.value);
        self.tape.make(v, self.tracked_with(other), || {
            Op::MatMul(self.parent(), other.parent(), self.value.clone(), other.value.clone())
        })
    }

    pub fn tanh(&self) -> Var<'t> {
        let v = self.value.mapv(f64::tanh);
        match self.node {
            Some(n) => {
                let out = Rc::new(v);
                let node = self.tape.push(Op::Tanh(n, out.clone()));
                Var { tape: self.tape, value: out, node: Some(node) }
            }
            None => self.tape.constant(v),
        }
    }

    pub fn relu(&self) -> Var<'t> {
        let v = self.value.mapv(|x| x.max(0.0));
        self.unary(v, |n| Op::Relu(n, self.value.clone()))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        let v = self.value.mapv(sigmoid);
        match self.node {
            Some(n) => {
                let out = Rc::new(v);
                let node = self.tape.push(Op::Sigmoid(n, out.clone()));
                Var { tape: self.tape, value: out, node: Some(node) }
            }
            None => self.tape.constant(v),
        }
    }

    pub fn exp(&self) -> Var<'t> {
        let v = self.value.mapv(f64::exp);
        match self.node {
            Some(n) => {
                let out = Rc::new(v);
                let node = self.tape.push(Op::Exp(n, out.clone()));
                Var { tape: self.tape, value: out, node: Some(node) }
            }
            None => self.tape.constant(v),
        }
    }

    pub fn ln(&self) -> Var<'t> {
        let v = self.value.mapv(f64::ln);
        self.unary(v, |n| Op::Log(n, self.value.clone()))
    }

    pub fn softplus(&self) -> Var<'t> {
        let v = self.value.mapv(softplus);
        self.unary(v, |n| Op::Softplus(n, self.value.clone()))
    }

    /// Clamps entries to `[lo, hi]`; the gradient is zero outside the band.
    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'t> {
        let v = self.value.mapv(|x| x.clamp(lo, hi));
        self.unary(v, |n| Op::Clamp(n, self.value.clone(), lo, hi))
    }

    /// Sum of all entries, `1 x 1`.
    pub fn sum(&self) -> Var<'t> {
        let v = Array2::from_elem((1, 1), self.value.sum());
        let shape = self.value.dim();
        self.unary(v, |n| Op::SumAll(n, shape))
    }

    /// Mean of all entries, `1 x 1`.
    pub fn mean(&self) -> Var<'t> {
        let shape = self.value.dim();
        let v = Array2::from_elem((1, 1), self.value.sum() / (shape.0 * shape.1) as f64);
        self.unary(v, |n| Op::MeanAll(n, shape))
    }

    /// Per-row sums, `R x 1`.
    pub fn sum_cols(&self) -> Var<'t> {
        let shape = self.value.dim();
        let v = self.value.sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(v, |n| Op::SumCols(n, shape))
    }

    /// Per-column sums, `1 x C`.
    pub fn sum_rows(&self) -> Var<'t> {
        let shape = self.value.dim();
        let v = self.value.sum_axis(Axis(0)).insert_axis(Axis(0));
        self.unary(v, |n| Op::SumRows(n, shape))
    }

    /// Row-wise log-sum-exp, `R x 1`.
    pub fn logsumexp_cols(&self) -> Var<'t> {
        let mut out = Array2::zeros((self.rows(), 1));
        for (r, row) in self.value.rows().into_iter().enumerate() {
            out[[r, 0]] = logsumexp(row.as_slice().expect("row-major")).unwrap_or(f64::NEG_INFINITY);
        }
        match self.node {
            Some(n) => {
                let out = Rc::new(out);
                let node = self.tape.push(Op::LogSumExpCols(n, self.value.clone(), out.clone()));
                Var { tape: self.tape, value: out, node: Some(node) }
            }
            None => self.tape.constant(out),
        }
    }

    /// Log-sum-exp over every entry, `1 x 1`.
    pub fn logsumexp(&self) -> Var<'t> {
        self.reshape((1, self.rows() * self.cols())).logsumexp_cols()
    }

    pub fn slice_cols(&self, start: usize, width: usize) -> Var<'t> {
        let v = self.value.slice(ndarray::s![.., start..start + width]).to_owned();
        let shape = self.value.dim();
        self.unary(v, |n| Op::SliceCols(n, start, shape))
    }

    pub fn slice_rows(&self, start: usize, len: usize) -> Var<'t> {
        let v = self.value.slice(ndarray::s![start..start + len, ..]).to_owned();
        let shape = self.value.dim();
        self.unary(v, |n| Op::SliceRows(n, start, shape))
    }

    /// Repeats every row `k` times in place: row `b` becomes rows
    /// `b*k .. b*k + k`.
    pub fn repeat_rows(&self, k: usize) -> Var<'t> {
        if k == 1 {
            return self.clone();
        }
        let (r, c) = self.value.dim();
        let v = self
            .value
            .view()
            .insert_axis(Axis(1))
            .broadcast((r, k, c))
            .unwrap()
            .to_owned()
            .into_shape_with_order((r * k, c))
            .unwrap();
        self.unary(v, |n| Op::RepeatRows(n, k))
    }

    /// Row-major reshape.
    pub fn reshape(&self, shape: (usize, usize)) -> Var<'t> {
        let from = self.value.dim();
        assert_eq!(from.0 * from.1, shape.0 * shape.1, "reshape size mismatch");
        let v = self.value.as_standard_layout().into_owned().into_shape_with_order(shape).unwrap();
        self.unary(v, |n| Op::Reshape(n, from))
    }
}

/// `max(v) + ln(sum(exp(v - max(v))))`, finite for any finite input.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::contract("logsumexp of an empty array"));
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(m);
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}
