//! Feed-forward networks, the gated recurrent cell and forward/backward
//! ODE-RNN encoders.

mod gru;
mod mlp;
mod ode_rnn;

pub use gru::GruCell;
pub use mlp::{Activation, Mlp, MlpSpec, OutputActivation};
pub use ode_rnn::{gather_observations, EncoderOutput, ForwardFeatures, NodeObs, OdeRnn};

#[cfg(test)]
mod tests;
