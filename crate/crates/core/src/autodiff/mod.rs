//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is built per forward pass: parameters enter as leaves, every
//! primitive appends a node, and [`Graph::backward`] sweeps the nodes in
//! reverse creation order, accumulating gradients additively across fan-out.
//! Only the primitives the encoder and its loss need are provided.

mod graph;
mod kernels;
mod optim;
mod tensor;

pub use graph::{Graph, NodeId, OpKind, IGNORE_INDEX, LAYER_NORM_EPS};
pub use optim::{AdamState, DEFAULT_LEARNING_RATE};
pub use tensor::Tensor;
