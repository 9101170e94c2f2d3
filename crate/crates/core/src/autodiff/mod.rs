//! Dense `f64` tensors with reverse-mode differentiation, the layers built
//! on them, an Adam optimizer and a binary checkpoint format.
//!
//! Tensors are reference-counted and single-threaded: a computation graph
//! lives on one thread. Gradients are accumulated only on trainable leaves.

mod gemm;
mod ops;
mod tensor;

pub mod checkpoint;
pub mod gradcheck;
pub mod nn;
pub mod optim;

pub use nn::{Conv1d, LayerNorm, Linear, MultiHeadAttention, ParameterStore, TransformerBlock};
pub use optim::Adam;
pub use tensor::{no_grad, Tensor};
