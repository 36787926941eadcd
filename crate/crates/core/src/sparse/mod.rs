//! Sparse coding: the LASSO, its proximal-gradient solver (ISTA), a
//! coordinate-descent reference solver, and the learned unrolled encoder
//! (LISTA) trained by gradient descent through the autodiff engine.
//!
//! Everything here works on single vectors with `ndarray`; the classifier
//! reuses the same recurrence row-wise inside its own graph.

mod ista;
mod lista;
mod problem;

use std::io;

use thiserror::Error;

pub use ista::{
    ista, ista_with_lipschitz, lasso_cd_oracle, lasso_objective, least_squares, lipschitz_constant,
    soft_threshold, soft_threshold_scalar, POWER_ITERATION_MAX, POWER_ITERATION_TOL,
};
pub use lista::{
    decode_params, encode_params, lista_forward, lista_init, lista_loss, lista_rows, lista_train, load_params,
    nmse, save_params, ListaParams, ListaTrainConfig, TrainedLista, TrainingPair,
};
pub use problem::{gaussian_dictionary, random_problem, sparse_code, ProblemSpec, SparseProblem};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dictionary must have at least one row and column")]
    EmptyDictionary,
    #[error("regularization weight must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("threshold {index} is negative ({value})")]
    NegativeThreshold { index: usize, value: f64 },
    #[error("normal equations are singular (rank-deficient dictionary)")]
    SingularSystem,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("layer count must be at least 1")]
    ZeroLayers,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("malformed params file: {0}")]
    Format(String),
    #[error("params file i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Tensor(#[from] crate::autodiff::TensorError),
}

pub type Result<T> = std::result::Result<T, SparseError>;

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SparseError::DimensionMismatch { what, expected, got })
    }
}
