//! Vibration-signal fault diagnosis with a LISTA-Transformer.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] loads or synthesizes labeled vibration signals and splits datasets.
//! * [`timefreq`] turns a signal into a time-frequency map (STFT, Morlet CWT,
//!   pseudo Wigner-Ville, Hilbert-Huang) and pools it to a 32×32 image.
//! * [`sparse`] holds the ISTA solver, a coordinate-descent LASSO oracle and the
//!   learnable LISTA encoder.
//! * [`autodiff`] is a small reverse-mode automatic differentiation engine over
//!   dense tensors.
//! * [`model`] builds the LISTA-Transformer classifier on top of it, with
//!   training, evaluation and checkpointing.

pub mod autodiff;
pub mod model;
pub mod rng;
pub mod signal;
pub mod sparse;
pub mod timefreq;

pub use autodiff::{Graph, Tensor, Var};
pub use model::{Architecture, ModelConfig, ModelParams};
pub use rng::XorShift64Star;
pub use signal::{FaultClass, LabeledSample, Signal, SignalFormat};
pub use timefreq::{Image, TimeFreqMap, TransformKind};
