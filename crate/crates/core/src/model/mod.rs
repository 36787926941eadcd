//! The LISTA-Transformer image classifier.
//!
//! A 32×32 time-frequency image is cut into 8×8 patches and embedded,
//! refined by a tied 7-step LISTA backbone, then passed through pre-norm
//! encoder layers. In each layer the attention output `z'` and the layer
//! input feed a LISTA block, and the two are blended by learnable weights
//! `α`, `β` before the MLP. The class token's final state feeds a linear
//! head. [`Architecture::Transformer`] drops every LISTA component, giving a
//! plain ViT for comparison.

mod checkpoint;
mod config;
mod eval;
mod forward;
mod train;
mod weights;

use std::io;

use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{Architecture, ModelConfig};
pub use eval::{evaluate, EvalReport};
pub use forward::{
    argmax, attention_half, backbone_lista, bind, forward, fuse_mlp, lista_block, mlp, mlp_half, msa,
    patch_embed, patchify, predict, predict_logits, Trace,
};
pub use train::{mean_loss, sample_gradient, train_classifier, EpochRecord, LabeledImage, TrainConfig, TrainOutcome};
pub use weights::{
    parameter_count, FusionWeights, LayerWeights, ListaWeights, ModelParams, Weights, FUSION_INIT, INIT_STD,
    LISTA_INIT_NOISE, LISTA_INIT_THETA,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected}x{expected} single-channel image, got {got}x{got}")]
    ImageShape { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Tensor(#[from] crate::autodiff::TensorError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
