//! Dense `f32` tensors with a small reverse-mode autodiff tape.
//!
//! Covers what a pixel-based actor-critic needs: valid convolutions and
//! their transposes, dense layers, layer norm, a handful of elementwise ops,
//! a tanh-squashed Gaussian log-density, Adam, and a binary checkpoint format.

pub mod adam;
pub mod checkpoint;
mod error;
mod kernels;
pub mod tape;
mod tensor;

pub use adam::Adam;
pub use error::{Result, TensorError};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
