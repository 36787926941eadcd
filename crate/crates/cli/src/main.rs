use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use listaformer_cli::train::{format_report, CHECKPOINT_FILE};
use listaformer_cli::{
    cmd_ablate, cmd_eval, cmd_export_tfmap, cmd_lista, cmd_preprocess, cmd_train, ListaOptions, RunConfig,
};
use listaformer_core::TransformKind;

/// Bearing-fault diagnosis from vibration signals with a LISTA-Transformer.
#[derive(Parser)]
#[command(name = "listaformer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn signals into a 32x32 time-frequency image dataset.
    Preprocess(Common),
    /// Train on a preprocessed dataset and save the best-validation checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to <out>/model.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the plain Transformer and the LISTA-Transformer and compare them.
    Ablate(Common),
    /// Write the time-frequency map of one signal and its pooled image as PGM.
    ExportTfmap {
        signal: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a standalone LISTA encoder on synthetic sparse-coding problems.
    Lista {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        layers: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Evaluate saved parameters instead of training.
        #[arg(long)]
        load: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generate N synthetic signals instead of reading the data directory.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    #[arg(long, value_parser = ["stft", "cwt", "wvd", "hht"])]
    transform: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Signal directory (preprocess) or image dataset (train, eval, ablate).
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.synthetic {
            cfg.set("synthetic", &n.to_string())?;
        }
        if let Some(t) = &self.transform {
            cfg.transform = t.parse::<TransformKind>()?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(data) = &self.data {
            cfg.data_dir = Some(data.clone());
        }
        if let Some(epochs) = self.epochs {
            cfg.set("epochs", &epochs.to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("LISTAFORMER_THREADS") {
        let n: usize = value
            .parse()
            .with_context(|| format!("LISTAFORMER_THREADS must be a positive integer, got {value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    configure_threads()?;
    match Cli::parse().command {
        Command::Preprocess(common) => {
            let cfg = common.resolve()?;
            let s = cmd_preprocess(&cfg)?;
            println!("wrote {} images to {} (per class {:?})", s.count, s.dir.display(), s.per_class);
        }
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let s = cmd_train(&cfg)?;
            println!(
                "split train/val/test = {}/{}/{}",
                s.split.train.len(),
                s.split.val.len(),
                s.split.test.len()
            );
            for r in &s.outcome.history {
                println!("epoch {:>3}  loss {:.5}  val {:.4}", r.epoch, r.train_loss, r.val_accuracy);
            }
            if let (Some(epoch), Some(acc)) = (s.outcome.best_epoch, s.best_val_accuracy()) {
                println!("best epoch {epoch} (val {acc:.4})");
            }
            println!("checkpoint {}", s.checkpoint.display());
            println!("history {}", s.history_file.display());
        }
        Command::Eval { common, checkpoint } => {
            let expected = common.config.is_some();
            let cfg = common.resolve()?;
            let checkpoint = checkpoint.unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
            let s = cmd_eval(
                &checkpoint,
                cfg.dataset_dir(),
                expected.then_some(&cfg.model),
                &cfg.out_dir,
            )?;
            print!("{}", format_report(&s.report));
            println!("wall time {:.3} s", s.wall_time.as_secs_f64());
            println!("report {}", s.report_file.display());
        }
        Command::Ablate(common) => {
            let cfg = common.resolve()?;
            print!("{}", cmd_ablate(&cfg)?.table());
        }
        Command::ExportTfmap { signal, common } => {
            let cfg = common.resolve()?;
            let s = cmd_export_tfmap(&signal, &cfg)?;
            println!("map {}x{} -> {}", s.map_shape.0, s.map_shape.1, s.map_file.display());
            println!("image {}x{} -> {}", s.image.size(), s.image.size(), s.image_file.display());
        }
        Command::Lista {
            seed,
            out,
            layers,
            steps,
            load,
        } => {
            let mut opts = ListaOptions {
                seed,
                layers,
                load,
                ..ListaOptions::default()
            };
            opts.train.steps = steps;
            let s = cmd_lista(&opts, &out)?;
            println!("held-out NMSE  ista {:.6}  lista {:.6}", s.ista_nmse, s.lista_nmse);
            if let Some(path) = s.params_file {
                println!("params {}", path.display());
            }
        }
    }
    Ok(())
}
