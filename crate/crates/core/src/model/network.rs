use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Mat, ParamId, ParamStore, Tape, Var};
use crate::encoders::{Activation, Mlp, MlpSpec, OdeRnn, OutputActivation};
use crate::error::{Error, Result};
use crate::model::{InferenceMode, VsdnConfig};
use crate::sde::noise::derive_seed;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Diagonal Gaussian emission.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianObsParams {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianObsParams {
    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }
}

/// Negative log-density of `y` summed over observed dimensions.
pub fn gaussian_nll(y: &[f64], mask: &[bool], obs: &GaussianObsParams) -> f64 {
    (0..y.len())
        .filter(|&j| mask[j])
        .map(|j| {
            let z = (y[j] - obs.mean[j]) * (-obs.log_std[j]).exp();
            HALF_LN_2PI + obs.log_std[j] + 0.5 * z * z
        })
        .sum()
}

/// The network: forward (and in smoothing mode backward) encoders, a
/// drift network shared by prior and posterior, the diffusion network,
/// the decoder and the initial latent state.
#[derive(Clone, Debug)]
pub struct Vsdn {
    pub(crate) cfg: VsdnConfig,
    pub(crate) store: ParamStore,
    pub(crate) fwd: OdeRnn,
    pub(crate) bwd: Option<OdeRnn>,
    pub(crate) drift: Mlp,
    pub(crate) diff: Mlp,
    pub(crate) decoder: Mlp,
    pub(crate) x0: ParamId,
    pub(crate) init_net: Option<Mlp>,
}

const OUTPUT_SCALE: f64 = 0.1;

impl Vsdn {
    /// Builds a freshly initialized model; weights are Glorot-uniform
    /// (the drift and decoder output layers shrunk tenfold), biases and the initial
    /// latent state zero.
    pub fn new(cfg: VsdnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x1417]));
        let mut store = ParamStore::new();
        let (d1, d2, dh, w) = (cfg.d1, cfg.d2, cfg.d_h, cfg.mlp_hidden);
        let act = cfg.activation;
        let fwd = OdeRnn::new(&mut store, "enc_fwd", d2, dh, w, &mut rng)?;
        let bwd = match cfg.mode {
            InferenceMode::Smoothing => Some(OdeRnn::new(&mut store, "enc_bwd", d2, dh, w, &mut rng)?),
            InferenceMode::Filtering => None,
        };
        let drift_spec = MlpSpec::new(vec![d1 + dh, w, d1], act, OutputActivation::Identity)?;
        let drift = Mlp::with_split(&mut store, "drift", drift_spec, &[d1, dh], &mut rng);
        drift.scale_output(&mut store, OUTPUT_SCALE);
        let diff_spec = MlpSpec::new(vec![dh, w, d1], act, OutputActivation::Identity)?;
        let diff = Mlp::new(&mut store, "diff", diff_spec, &mut rng);
        let dec_spec = MlpSpec::new(vec![d1 + dh, w, 2 * d2], act, OutputActivation::Identity)?;
        let decoder = Mlp::with_split(&mut store, "decoder", dec_spec, &[d1, dh], &mut rng);
        decoder.scale_output(&mut store, OUTPUT_SCALE);
        let x0 = store.add("x0", Array2::zeros((1, d1)));
        let init_net = if cfg.initializer_net {
            let spec = MlpSpec::new(vec![2 * d2, d1], Activation::Tanh, OutputActivation::Identity)?;
            Some(Mlp::new(&mut store, "init", spec, &mut rng))
        } else {
            None
        };
        Ok(Vsdn { cfg, store, fwd, bwd, drift, diff, decoder, x0, init_net })
    }

    pub fn config(&self) -> &VsdnConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn forward_encoder(&self) -> &OdeRnn {
        &self.fwd
    }

    pub fn backward_encoder(&self) -> Option<&OdeRnn> {
        self.bwd.as_ref()
    }

    /// Replaces every parameter block (and its optimizer state) by the block
    /// of the same name and shape from `other`.
    pub(crate) fn load_store(&mut self, other: ParamStore) -> Result<()> {
        if other.len() != self.store.len() {
            return Err(Error::Checkpoint(format!("{} parameter blocks, model has {}", other.len(), self.store.len())));
        }
        for (id, block) in self.store.iter() {
            let Some(oid) = other.id(&block.name) else {
                return Err(Error::Checkpoint(format!("missing parameter block `{}`", block.name)));
            };
            if other.get(oid).dim() != block.value.dim() {
                return Err(Error::Checkpoint(format!("shape mismatch for `{}`", block.name)));
            }
            debug_assert_eq!(id, self.store.id(&block.name).unwrap());
        }
        let mut fresh = ParamStore::new();
        for (_, block) in self.store.iter() {
            fresh.push_block(other.block(other.id(&block.name).unwrap()).clone());
        }
        fresh.set_step_count(other.step_count());
        self.store = fresh;
        Ok(())
    }

    /// `h · W0[feature] + b0` for a first layer split as `[x, feature]`.
    pub(crate) fn feature_part<'t>(net: &Mlp, p: &[Var<'t>], feature: &Var<'t>) -> Var<'t> {
        net.project(p, 1, feature).add(&net.bias0(p))
    }

    /// Evaluates a `[x, feature]` network given the feature part, already
    /// expanded to the rows of `x`.
    pub(crate) fn with_state<'t>(net: &Mlp, p: &[Var<'t>], x: &Var<'t>, feature_part: &Var<'t>) -> Var<'t> {
        net.finish(p, &net.project(p, 0, x).add(feature_part))
    }

    /// Log diffusion for a block of features.
    pub(crate) fn log_diffusion<'t>(&self, p: &[Var<'t>], feature: &Var<'t>) -> Result<Var<'t>> {
        self.diff.forward(p, feature)
    }

    /// Splits decoder output into mean and clamped log standard deviation.
    pub(crate) fn emission<'t>(&self, out: &Var<'t>) -> (Var<'t>, Var<'t>) {
        let d2 = self.cfg.d2;
        let c = self.cfg.log_std_clamp;
        (out.slice_cols(0, d2), out.slice_cols(d2, d2).clamp(-c, c))
    }

    /// Masked Gaussian log-likelihood per row (`R x 1`).
    pub(crate) fn row_loglik<'t>(mean: &Var<'t>, log_std: &Var<'t>, y: &Var<'t>, mask: &Var<'t>) -> Var<'t> {
        let z = y.sub(mean).mul(&log_std.neg().exp());
        z.square().scale(0.5).add(log_std).add_scalar(HALF_LN_2PI).mul(mask).sum_cols().neg()
    }

    /// Initial latent states for `rows` rows, `first_inputs` holding the
    /// first observation input of each of the `rows / samples` series.
    pub(crate) fn initial_state<'t>(&self, p: &[Var<'t>], tape: &'t Tape, first_inputs: &Mat, samples: usize) -> Result<Var<'t>> {
        match &self.init_net {
            Some(net) => Ok(net.forward(p, &tape.constant(first_inputs.clone()))?.repeat_rows(samples)),
            None => Ok(p[self.x0.0].repeat_rows(first_inputs.nrows() * samples)),
        }
    }

    fn check(&self, v: &[f64], want: usize, what: &str) -> Result<()> {
        if v.len() != want {
            return Err(Error::contract(format!("{what} has width {}, expected {want}", v.len())));
        }
        Ok(())
    }

    /// Prior drift `N_drift([x, h_pre])` for one state.
    pub fn drift_prior(&self, x: &[f64], pre_feature: &[f64]) -> Result<Vec<f64>> {
        self.check(x, self.cfg.d1, "latent state")?;
        self.check(pre_feature, self.cfg.d_h, "feature")?;
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let part = Self::feature_part(&self.drift, &p, &tape.row(pre_feature));
        Ok(Self::with_state(&self.drift, &p, &tape.row(x), &part).value().iter().copied().collect())
    }

    /// Diffusion `exp(N_diff(h_pre))`; the latent state is not an input.
    pub fn diffusion(&self, pre_feature: &[f64]) -> Result<Vec<f64>> {
        self.check(pre_feature, self.cfg.d_h, "feature")?;
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        Ok(self.log_diffusion(&p, &tape.row(pre_feature))?.value().iter().map(|v| v.exp()).collect())
    }

    /// Posterior drift. Smoothing uses `aux` (the backward feature) at every
    /// node; filtering uses `aux` (the post-update feature) only at an
    /// observation and otherwise returns the prior drift.
    pub fn drift_posterior(&self, x: &[f64], pre_feature: &[f64], aux: Option<&[f64]>, at_observation: bool) -> Result<Vec<f64>> {
        let aux = match (self.cfg.mode, aux, at_observation) {
            (InferenceMode::Filtering, Some(_), false) => {
                return Err(Error::contract("filtering posterior given a post feature away from an observation"))
            }
            (InferenceMode::Filtering, None, true) => {
                return Err(Error::contract("filtering posterior at an observation needs the post feature"))
            }
            (InferenceMode::Smoothing, None, _) => return Err(Error::contract("smoothing posterior needs the backward feature")),
            (_, aux, _) => aux,
        };
        match aux {
            None => self.drift_prior(x, pre_feature),
            Some(a) => {
                self.check(a, self.cfg.d_h, "auxiliary feature")?;
                let f: Vec<f64> = pre_feature.iter().zip(a).map(|(u, v)| u + v).collect();
                self.drift_prior(x, &f)
            }
        }
    }

    /// Decoder emission at state `x` with forward feature `pre_feature`.
    pub fn decode(&self, x: &[f64], pre_feature: &[f64]) -> Result<GaussianObsParams> {
        self.check(x, self.cfg.d1, "latent state")?;
        self.check(pre_feature, self.cfg.d_h, "feature")?;
        let tape = Tape::no_grad();
        let p = tape.bind(&self.store);
        let part = Self::feature_part(&self.decoder, &p, &tape.row(pre_feature));
        let out = Self::with_state(&self.decoder, &p, &tape.row(x), &part);
        let (mean, log_std) = self.emission(&out);
        Ok(GaussianObsParams { mean: mean.value().iter().copied().collect(), log_std: log_std.value().iter().copied().collect() })
    }

    /// The learned constant initial latent state.
    pub fn initial_latent(&self) -> Vec<f64> {
        self.store.get(self.x0).iter().copied().collect()
    }
}
