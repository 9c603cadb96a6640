//! Minimal neural network stack: linear, 2D/3D convolution, LSTM, ReLU and
//! tanh layers with explicit forward caches and backward passes, Adam, and a
//! binary checkpoint format.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and `f64` for gradient checks.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod init;
pub mod layer;
pub mod lstm;
pub mod network;
mod ops;
pub mod scalar;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layer::{LayerSpec, Sequential, SequentialSpec, Shape};
pub use lstm::{Hidden, Lstm};
pub use network::{ConvSpec, Encoder, NetworkSpec, ObsBatch};
pub use scalar::Real;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{part} layer {index}: {message}")]
    Spec {
        part: String,
        index: usize,
        message: String,
    },
    #[error("{part}: expected {expected} values, got {got}")]
    Shape {
        part: String,
        expected: usize,
        got: usize,
    },
}
