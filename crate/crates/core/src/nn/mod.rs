//! A small neural-network engine: tensors, layers with explicit backward
//! passes, softmax/cross-entropy, and Adam.
//!
//! Layers do not own gradient buffers. Each `backward` accumulates into a
//! caller-supplied slice of tensors laid out like the layer's `params()`, so a
//! batch can be reduced in a fixed order.

mod adam;
mod checkpoint;
mod conv;
mod dense;
mod loss;
mod recurrent;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, WEIGHTS_MARKER};
pub use conv::{Conv2d, MaxPool2d, KERNEL};
pub use dense::Dense;
pub use loss::{cross_entropy, softmax, softmax_cross_entropy_grad, PROB_FLOOR};
pub use recurrent::{CellKind, RecurrentLayer, RecurrentState, SequenceTrace};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(self, values: &mut [f64]) {
        if self == Activation::Relu {
            for v in values {
                *v = v.max(0.0);
            }
        }
    }

    /// Multiplies `grad` by the activation derivative, given the activated output.
    pub fn backprop(self, output: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            for (g, y) in grad.iter_mut().zip(output) {
                if *y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Glorot/Xavier uniform bound `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
