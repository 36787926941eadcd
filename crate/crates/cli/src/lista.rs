//! Standalone LISTA training on synthetic sparse-coding problems.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use listaformer_core::sparse::{
    gaussian_dictionary, lista_init, lista_train, load_params, nmse, random_problem, save_params, ListaParams,
    ListaTrainConfig, ProblemSpec, TrainingPair,
};
use listaformer_core::XorShift64Star;

pub const PARAMS_FILE: &str = "lista.params";

#[derive(Debug, Clone, PartialEq)]
pub struct ListaOptions {
    pub rows: usize,
    pub atoms: usize,
    pub layers: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub train: ListaTrainConfig,
    pub spec: ProblemSpec,
    /// Seeds the dictionary and the problems.
    pub seed: u64,
    /// Evaluate these saved parameters instead of training.
    pub load: Option<PathBuf>,
}

impl Default for ListaOptions {
    fn default() -> Self {
        Self {
            rows: 4,
            atoms: 8,
            layers: 7,
            train_pairs: 500,
            test_pairs: 100,
            train: ListaTrainConfig::default(),
            spec: ProblemSpec::default(),
            seed: 0,
            load: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ListaSummary {
    /// Held-out NMSE of ISTA run for `layers` iterations.
    pub ista_nmse: f64,
    pub lista_nmse: f64,
    pub params: ListaParams,
    /// Where trained parameters were written (`None` when loading).
    pub params_file: Option<PathBuf>,
}

/// Trains (or loads) a LISTA encoder for one random dictionary and compares
/// it with equal-depth ISTA on fresh problems.
pub fn cmd_lista(opts: &ListaOptions, out_dir: &Path) -> Result<ListaSummary> {
    ensure!(opts.rows > 0 && opts.atoms > 0, "rows and atoms must be positive");
    ensure!(opts.train_pairs > 0 && opts.test_pairs > 0, "pair counts must be positive");
    let mut rng = XorShift64Star::new(opts.seed);
    let dictionary = gaussian_dictionary(&mut rng, opts.rows, opts.atoms);
    let mut draw = |count: usize| -> Result<Vec<TrainingPair>> {
        (0..count)
            .map(|_| {
                let p = random_problem(&mut rng, &dictionary, opts.spec)?;
                Ok(TrainingPair::from_problem(&p).expect("generated problems carry their code"))
            })
            .collect()
    };
    let train = draw(opts.train_pairs)?;
    let held_out = draw(opts.test_pairs)?;
    let init = lista_init(&dictionary, opts.spec.alpha, opts.layers)?;

    let (params, params_file) = match &opts.load {
        Some(path) => {
            let params = load_params(path)?;
            ensure!(
                params.measurement_dim() == opts.rows && params.code_dim() == opts.atoms,
                "{} holds a {}x{} encoder, expected {}x{}",
                path.display(),
                params.code_dim(),
                params.measurement_dim(),
                opts.atoms,
                opts.rows
            );
            (params, None)
        }
        None => {
            let trained = lista_train(&train, &init, opts.train)?;
            fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let path = out_dir.join(PARAMS_FILE);
            save_params(&trained.params, &path)?;
            (trained.params, Some(path))
        }
    };
    Ok(ListaSummary {
        ista_nmse: nmse(&init, &held_out)?,
        lista_nmse: nmse(&params, &held_out)?,
        params,
        params_file,
    })
}
