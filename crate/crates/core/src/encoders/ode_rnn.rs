use ndarray::{s, Array2};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Mat, ParamId, ParamStore, Tape, Var};
use crate::data::TimeSeries;
use crate::encoders::gru::GruCell;
use crate::encoders::mlp::{glorot, Activation, Mlp, MlpSpec, OutputActivation};
use crate::error::{Error, Result};
use crate::sde::TimeGrid;

/// Observations of a batch of `B` series that fall on one grid node.
#[derive(Clone, Debug)]
pub struct NodeObs {
    /// `B x 1`, 1 for series observed at this node.
    pub rows: Mat,
    /// `B x 2 d2`: zero-filled values followed by mask bits.
    pub input: Mat,
    /// `B x d2` values.
    pub y: Mat,
    /// `B x d2` mask as 0/1.
    pub ymask: Mat,
    /// Number of observed series (frames) at this node.
    pub count: usize,
}

impl NodeObs {
    pub fn all_rows(&self) -> bool {
        self.count == self.rows.nrows()
    }
}

/// Places the frames of every series on `grid` (each observation time must
/// be a node). Entry `i` is `None` when no series is observed at node `i`.
pub fn gather_observations(series: &[&TimeSeries], grid: &TimeGrid) -> Result<Vec<Option<NodeObs>>> {
    let b = series.len();
    let d2 = series.first().map_or(0, |s| s.dim());
    let mut out: Vec<Option<NodeObs>> = vec![None; grid.len()];
    for (r, s) in series.iter().enumerate() {
        if s.dim() != d2 {
            return Err(Error::contract("series in one batch must share their dimension"));
        }
        for (n, &t) in s.times().iter().enumerate() {
            let node = grid.locate(t).ok_or_else(|| {
                Error::contract(format!("observation time {t} of series {} is not a grid node", s.id()))
            })?;
            let slot = out[node].get_or_insert_with(|| NodeObs {
                rows: Array2::zeros((b, 1)),
                input: Array2::zeros((b, 2 * d2)),
                y: Array2::zeros((b, d2)),
                ymask: Array2::zeros((b, d2)),
                count: 0,
            });
            slot.rows[[r, 0]] = 1.0;
            slot.count += 1;
            for j in 0..d2 {
                let m = if s.mask()[[n, j]] { 1.0 } else { 0.0 };
                let v = s.values()[[n, j]];
                slot.input[[r, j]] = v;
                slot.input[[r, d2 + j]] = m;
                slot.y[[r, j]] = v;
                slot.ymask[[r, j]] = m;
            }
        }
    }
    Ok(out)
}

/// Features of a forward pass, one `B x d_h` value per grid node.
pub struct ForwardFeatures<'t> {
    /// State before any update at the node.
    pub pre: Vec<Var<'t>>,
    /// State after the update, at nodes carrying observations.
    pub post: Vec<Option<Var<'t>>>,
}

/// Per-series encoder output as plain arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    /// `nodes x d_h`.
    pub pre_features: Array2<f64>,
    /// `observations x d_h`, row `n` belongs to the series' `n`th frame.
    pub post_features: Array2<f64>,
    /// `nodes x d_h`, present for the backward encoder.
    pub back_features: Option<Array2<f64>>,
}

/// ODE-RNN: a hidden state that follows `dh/dt = N(h)` (one Euler step per
/// grid interval) and jumps through a GRU cell at observations.
#[derive(Clone, Debug)]
pub struct OdeRnn {
    h0: ParamId,
    flow: Mlp,
    cell: GruCell,
    hidden: usize,
}

impl OdeRnn {
    pub fn new(store: &mut ParamStore, prefix: &str, d2: usize, hidden: usize, flow_hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let h0 = store.add(format!("{prefix}.h0"), glorot(rng, 1, hidden).mapv(|v| 0.1 * v));
        let spec = MlpSpec::new(vec![hidden, flow_hidden, hidden], Activation::Tanh, OutputActivation::Identity)?;
        let flow = Mlp::new(store, &format!("{prefix}.flow"), spec, rng);
        let cell = GruCell::new(store, &format!("{prefix}.gru"), 2 * d2, hidden, rng);
        Ok(OdeRnn { h0, flow, cell, hidden })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn initial<'t>(&self, p: &[Var<'t>], batch: usize) -> Var<'t> {
        p[self.h0.0].repeat_rows(batch)
    }

    fn flow_step<'t>(&self, p: &[Var<'t>], h: &Var<'t>, dt: f64) -> Result<Var<'t>> {
        Ok(h.add(&self.flow.forward(p, h)?.scale(dt)))
    }

    fn jump<'t>(&self, p: &[Var<'t>], tape: &'t Tape, h: &Var<'t>, obs: &NodeObs) -> Result<Var<'t>> {
        let g = self.cell.update(p, h, &tape.constant(obs.input.clone()))?;
        if obs.all_rows() {
            Ok(g)
        } else {
            Ok(h.add(&g.sub(h).mul(&tape.constant(obs.rows.clone()))))
        }
    }

    /// Forward pass over `grid` for a batch of `batch` rows.
    pub fn run_forward<'t>(
        &self,
        p: &[Var<'t>],
        tape: &'t Tape,
        grid: &TimeGrid,
        obs: &[Option<NodeObs>],
        batch: usize,
    ) -> Result<ForwardFeatures<'t>> {
        check_len(grid, obs)?;
        let mut h = self.initial(p, batch);
        let mut pre = Vec::with_capacity(grid.len());
        let mut post = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            pre.push(h.clone());
            match &obs[i] {
                Some(o) => {
                    h = self.jump(p, tape, &h, o)?;
                    post.push(Some(h.clone()));
                }
                None => post.push(None),
            }
            if i + 1 < grid.len() {
                h = self.flow_step(p, &h, grid.dt()[i])?;
            }
        }
        Ok(ForwardFeatures { pre, post })
    }

    /// Backward pass: walks the grid from the end, applying the update at a
    /// node before emitting its feature.
    pub fn run_backward<'t>(
        &self,
        p: &[Var<'t>],
        tape: &'t Tape,
        grid: &TimeGrid,
        obs: &[Option<NodeObs>],
        batch: usize,
    ) -> Result<Vec<Var<'t>>> {
        check_len(grid, obs)?;
        let n = grid.len();
        let mut h = self.initial(p, batch);
        let mut back = Vec::with_capacity(n);
        for i in (0..n).rev() {
            if let Some(o) = &obs[i] {
                h = self.jump(p, tape, &h, o)?;
            }
            back.push(h.clone());
            if i > 0 {
                h = self.flow_step(p, &h, grid.dt()[i - 1])?;
            }
        }
        back.reverse();
        Ok(back)
    }

    /// Forward features of a single series on its grid.
    pub fn encode_forward(&self, store: &ParamStore, series: &TimeSeries, grid: &TimeGrid) -> Result<EncoderOutput> {
        let tape = Tape::no_grad();
        let p = tape.bind(store);
        let obs = gather_observations(&[series], grid)?;
        let f = self.run_forward(&p, &tape, grid, &obs, 1)?;
        let pre_features = stack_rows(f.pre.iter().map(|v| v.value()), self.hidden);
        let post_features =
            stack_rows(series.times().iter().map(|&t| f.post[grid.locate(t).unwrap()].as_ref().unwrap().value()), self.hidden);
        Ok(EncoderOutput { pre_features, post_features, back_features: None })
    }

    /// Backward features of a single series on its grid.
    pub fn encode_backward(&self, store: &ParamStore, series: &TimeSeries, grid: &TimeGrid) -> Result<Array2<f64>> {
        let tape = Tape::no_grad();
        let p = tape.bind(store);
        let obs = gather_observations(&[series], grid)?;
        let back = self.run_backward(&p, &tape, grid, &obs, 1)?;
        Ok(stack_rows(back.iter().map(|v| v.value()), self.hidden))
    }
}

fn check_len(grid: &TimeGrid, obs: &[Option<NodeObs>]) -> Result<()> {
    if obs.len() != grid.len() {
        return Err(Error::contract(format!("{} observation slots for a grid of {} nodes", obs.len(), grid.len())));
    }
    Ok(())
}

fn stack_rows<'a>(rows: impl Iterator<Item = &'a Mat>, width: usize) -> Array2<f64> {
    let rows: Vec<&Mat> = rows.collect();
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        out.slice_mut(s![i, ..]).assign(&r.row(0));
    }
    out
}
