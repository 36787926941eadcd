//! Command implementations behind the `listaformer` binary.
//!
//! Each `cmd_*` function takes its settings explicitly and returns a summary
//! value; the binary only parses arguments and prints.

pub mod config;
pub mod dataset;
pub mod export;
pub mod lista;
pub mod preprocess;
pub mod train;

pub use config::RunConfig;
pub use export::{cmd_export_tfmap, ExportSummary};
pub use lista::{cmd_lista, ListaOptions, ListaSummary};
pub use preprocess::{cmd_preprocess, PreprocessSummary};
pub use train::{cmd_ablate, cmd_eval, cmd_train, AblationRun, AblationSummary, EvalSummary, TrainSummary};
