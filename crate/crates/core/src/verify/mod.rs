//! Executable oracles: path-KL Monte Carlo, importance-weight identity,
//! bound ordering, gradient checks, the noise-injection experiment and
//! the K-sweep training harness.

mod bounds;
mod checks;
mod k_sweep;
mod kl_oracle;
mod noise_injection;

pub use bounds::{assess_ordering, bound_ordering_sweep, BoundRow, OrderingVerdict};
pub use checks::{
    diffusion_state_sensitivity, euler_ou_moments, gradient_check, logw_identity_check, mask_soundness, toy_series, MaskSoundness, relative_error, DiffusionSensitivity,
    EulerMoments, GradCheckReport,
};
pub use k_sweep::{k_sweep_training, SweepRow};
pub use kl_oracle::{kl_mc_oracle, KlOracleReport};
pub use noise_injection::{
    autodiff_gradients, closed_form_gradients, noise_injection_experiment, DiffusionCase, NoiseInjectionReport, PhiTheta,
};
