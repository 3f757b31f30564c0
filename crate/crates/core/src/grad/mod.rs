//! Reverse-mode differentiation over real parameter blocks.
//!
//! Models are written against the [`Graph`] trait; the same code runs on a
//! [`Tape`] when gradients are needed and on [`Eval`] otherwise.

mod graph;
mod kernels;
mod store;
mod tape;

pub use graph::{Eval, Graph};
pub use store::{GradBuffer, ParamBlock, ParamId, ParamStore};
pub use tape::{NodeId, Primitive, Tape};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("parameter block {0:?} already exists")]
    DuplicateBlock(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str, node: usize },
    #[error("expected a scalar node")]
    NotScalar,
    #[error("backward already ran on this tape; call reset first")]
    AlreadyBackpropagated,
}
