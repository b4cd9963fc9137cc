//! Minimal dense-tensor and autodiff kernel.
//!
//! Everything is f64 and CPU-only: a row-major 2-D tensor, a tape that records
//! forward ops and replays them in reverse for gradients, Adam, seeded
//! initialization, and a flat binary checkpoint format. Just enough machinery
//! to train small attention/MLP models without an external ML runtime.

#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod init;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use optim::{Adam, AdamConfig, Parameter};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor2;

/// Errors surfaced by tensor ops, the tape, and checkpoint IO.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite values produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
