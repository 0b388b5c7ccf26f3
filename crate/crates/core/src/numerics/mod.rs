//! Dense `f64` tensors, a reverse-mode tape and the Adam optimizer.

mod adam;
mod graph;
pub(crate) mod kernels;
mod ops;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub(crate) use graph::rotate_rows;
pub use graph::{Gradients, Graph, NodeId, Segment};
pub use ops::{cross_entropy, sigmoid, silu, softmax, softplus};
pub use tensor::Tensor;
