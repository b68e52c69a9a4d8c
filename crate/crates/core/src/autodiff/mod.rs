//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.

mod adam;
mod graph;
mod tensor;

pub use adam::AdamState;
pub(crate) use graph::log_sum_exp;
pub use graph::{Activation, Graph, NodeId};
pub use tensor::Tensor;
