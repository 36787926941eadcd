//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records every operation as it is applied. Calling
//! [`Graph::backward`] on a scalar node sweeps the record in reverse and
//! accumulates gradients for every node built from a [`Graph::param`].

mod gradcheck;
mod graph;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, relative_error, DEFAULT_FD_STEP};
pub use graph::{Graph, Var, LAYERNORM_EPS};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} elements")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("axis {axis} out of range for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("slice {start}..{end} out of range for extent {extent}")]
    SliceOutOfRange { start: usize, end: usize, extent: usize },
    #[error("concat of zero tensors")]
    EmptyConcat,
}

pub type Result<T> = std::result::Result<T, TensorError>;
