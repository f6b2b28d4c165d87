//! Dense-tensor arithmetic with reverse-mode automatic differentiation and
//! the ADAM optimizer. All model math in this crate rests on this module.
//!
//! Everything is 64-bit floating point. Forward evaluation is deterministic:
//! identical inputs (and seeds, where randomness is involved) yield
//! bit-identical outputs.

mod optim;
mod tape;
mod tensor;

pub use optim::{adam_step, glorot_from_rng, glorot_init, AdamState};
pub use tape::{BinaryKind, Gradients, Tape, Var};
pub use tensor::{matmul_raw, Tensor};

use thiserror::Error;

/// Default slope for leaky-ReLU activations.
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("bad shape: {what}")]
    BadShape { what: String },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}
