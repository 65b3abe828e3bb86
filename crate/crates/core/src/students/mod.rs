//! The two student networks: a GRU sequence model for the memory task and a
//! dense VAE for driving scenes. Both build their forward pass on an
//! [`crate::autodiff::Graph`] from a [`ParamSet`] bound to it.

mod gru;
mod params;
mod vae;

pub use gru::{
    episode_symbols, GruInput, GruOutput, GruStudent, GruStudentConfig, CONTEXT_STEPS, INPUT_SIZE,
    OUTPUT_RANGE,
};
pub use params::{CheckpointManifest, ParamSet, TensorEntry};
pub use vae::{VaeOutput, VaeStudent, VaeStudentConfig, LEAKY_SLOPE};

use crate::rng::Rng;

/// Training mode draws dropout masks / reparameterization noise from the
/// given generator; eval mode is deterministic.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}
