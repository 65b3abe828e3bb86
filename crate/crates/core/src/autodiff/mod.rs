//! Reverse-mode automatic differentiation over dense `f64` tensors, plus Adam.

mod adam;
mod graph;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use graph::{Activation, Graph, Var};
pub use tensor::Tensor;
