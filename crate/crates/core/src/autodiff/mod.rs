//! Reverse-mode differentiation, parameter storage and optimization.

mod fd;
mod params;
mod tape;

pub use fd::finite_diff_oracle;
pub use params::{adam_step, clip_global_norm, AdamHyper, Gradients, ParamBlock, ParamId, ParamStore};
pub use tape::{logsumexp, Mat, Tape, Var};

#[cfg(test)]
mod tests;
