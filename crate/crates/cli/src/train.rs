use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use listaformer_core::model::{
    evaluate, load_checkpoint, parameter_count, save_checkpoint, train_classifier, Checkpoint, EvalReport,
    LabeledImage, TrainOutcome,
};
use listaformer_core::signal::{split_stratified, DatasetSplit};
use listaformer_core::{Architecture, FaultClass, ModelConfig, ModelParams};

use crate::config::RunConfig;
use crate::dataset::load_dataset;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.json";
pub const ABLATION_FILE: &str = "ablation.txt";

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history_file: PathBuf,
    pub split: DatasetSplit,
    pub outcome: TrainOutcome,
}

impl TrainSummary {
    pub fn best_val_accuracy(&self) -> Option<f64> {
        let best = self.outcome.best_epoch?;
        Some(self.outcome.history[best - 1].val_accuracy)
    }
}

fn select(data: &[LabeledImage], indices: &[usize]) -> Vec<LabeledImage> {
    indices.iter().map(|&i| data[i].clone()).collect()
}

fn split_of(data: &[LabeledImage], seed: u64) -> Result<DatasetSplit> {
    let labels: Vec<usize> = data.iter().map(|s| s.label).collect();
    Ok(split_stratified(&labels, seed)?)
}

fn check_dataset(data: &[LabeledImage], model: &ModelConfig) -> Result<()> {
    let size = data[0].image.size();
    ensure!(
        size == model.image_size,
        "dataset images are {size}x{size} but the model expects image_size = {}",
        model.image_size
    );
    if let Some(s) = data.iter().find(|s| s.label >= model.num_classes) {
        bail!("dataset label {} is out of range for num_classes = {}", s.label, model.num_classes);
    }
    Ok(())
}

/// Trains `model` on the run's split; everything except the architecture
/// comes from `cfg`.
fn fit(cfg: &RunConfig, model: &ModelConfig, data: &[LabeledImage], split: &DatasetSplit) -> Result<TrainOutcome> {
    check_dataset(data, model)?;
    let init = ModelParams::init(model, cfg.init_seed())?;
    let train = select(data, &split.train);
    let val = select(data, &split.val);
    Ok(train_classifier(&train, &val, model, init, &cfg.train_config())?)
}

pub fn history_csv(outcome: &TrainOutcome) -> String {
    let mut out = String::from("epoch,train_loss,val_acc\n");
    for r in &outcome.history {
        let _ = writeln!(out, "{},{:.10},{:.6}", r.epoch, r.train_loss, r.val_accuracy);
    }
    out
}

/// Splits the dataset 70/20/10, trains and writes the best-validation
/// checkpoint plus the per-epoch history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg.dataset_dir())?;
    let split = split_of(&data, cfg.split_seed())?;
    let outcome = fit(cfg, &cfg.model, &data, &split)?;

    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut extras = vec![
        ("split_seed".to_string(), cfg.split_seed().to_string()),
        ("transform".to_string(), cfg.transform.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
    ];
    if let Some(best) = outcome.best_epoch {
        extras.push(("best_epoch".into(), best.to_string()));
        extras.push(("val_accuracy".into(), outcome.history[best - 1].val_accuracy.to_string()));
    }
    let checkpoint = cfg.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(
        &Checkpoint {
            config: cfg.model,
            params: outcome.params.clone(),
            extras,
        },
        &checkpoint,
    )?;
    let history_file = cfg.out_dir.join(HISTORY_FILE);
    fs::write(&history_file, history_csv(&outcome))?;
    Ok(TrainSummary {
        checkpoint,
        history_file,
        split,
        outcome,
    })
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub report: EvalReport,
    pub wall_time: Duration,
    pub report_file: PathBuf,
}

/// Flat JSON rendering of a report. Wall time is left out so repeated
/// evaluations produce identical files.
pub fn report_json(report: &EvalReport) -> String {
    let classes: Vec<String> = (0..report.confusion.len())
        .map(|c| FaultClass::from_index(c).map_or_else(|_| c.to_string(), |f| f.tag().to_string()))
        .collect();
    let value = serde_json::json!({
        "accuracy": report.accuracy,
        "total": report.total,
        "classes": classes,
        "precision": report.precision,
        "recall": report.recall,
        "confusion": report.confusion,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    text
}

pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accuracy  {:.4} ({} samples)", report.accuracy, report.total);
    let _ = writeln!(out, "class      precision  recall");
    for c in 0..report.confusion.len() {
        let name = FaultClass::from_index(c).map_or_else(|_| c.to_string(), |f| f.tag().to_string());
        let _ = writeln!(out, "{name:<10} {:>9.4}  {:>6.4}", report.precision[c], report.recall[c]);
    }
    let _ = writeln!(out, "confusion (rows = true class)");
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>5}")).collect();
        let _ = writeln!(out, "{}", cells.join(""));
    }
    out
}

fn config_block(config: &ModelConfig) -> String {
    config.to_pairs().iter().map(|(k, v)| format!("  {k} = {v}\n")).collect()
}

/// Evaluates a checkpoint on the test split of the dataset in `dataset`.
///
/// The split is rebuilt from the seed stored in the checkpoint. When
/// `expected` is given, it must equal the checkpoint's configuration.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset: &Path,
    expected: Option<&ModelConfig>,
    out_dir: &Path,
) -> Result<EvalSummary> {
    let start = Instant::now();
    let ck = load_checkpoint(checkpoint)?;
    if let Some(want) = expected {
        if *want != ck.config {
            bail!(
                "configuration mismatch\nrun config:\n{}checkpoint {}:\n{}",
                config_block(want),
                checkpoint.display(),
                config_block(&ck.config)
            );
        }
    }
    let data = load_dataset(dataset)?;
    if let Err(e) = check_dataset(&data, &ck.config) {
        let size = data[0].image.size();
        bail!(
            "{e}\ndataset {}: image_size = {size}\ncheckpoint {}:\n{}",
            dataset.display(),
            checkpoint.display(),
            config_block(&ck.config)
        );
    }
    let split_seed: u64 = ck
        .extra("split_seed")
        .context("checkpoint has no split_seed")?
        .parse()
        .context("checkpoint split_seed is not an integer")?;
    let split = split_of(&data, split_seed)?;
    let report = evaluate(&ck.params, &ck.config, &select(&data, &split.test))?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let report_file = out_dir.join(REPORT_FILE);
    fs::write(&report_file, report_json(&report))?;
    Ok(EvalSummary {
        report,
        wall_time: start.elapsed(),
        report_file,
    })
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub config: ModelConfig,
    pub parameters: usize,
    pub best_val_accuracy: f64,
    pub test: EvalReport,
}

#[derive(Debug, Clone)]
pub struct AblationSummary {
    pub transformer: AblationRun,
    pub lista_transformer: AblationRun,
}

impl AblationSummary {
    /// LISTA-Transformer minus plain Transformer test accuracy.
    pub fn accuracy_delta(&self) -> f64 {
        self.lista_transformer.test.accuracy - self.transformer.test.accuracy
    }

    pub fn parameter_delta(&self) -> usize {
        self.lista_transformer.parameters - self.transformer.parameters
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for run in [&self.transformer, &self.lista_transformer] {
            let _ = writeln!(out, "config {}: {}", run.config.architecture, run.config);
        }
        let _ = writeln!(out, "{:<18} {:>10} {:>8} {:>8}", "model", "params", "val", "test");
        for run in [&self.transformer, &self.lista_transformer] {
            let _ = writeln!(
                out,
                "{:<18} {:>10} {:>8.4} {:>8.4}",
                run.config.architecture.name(),
                run.parameters,
                run.best_val_accuracy,
                run.test.accuracy
            );
        }
        let _ = writeln!(out, "accuracy delta     {:+.4}", self.accuracy_delta());
        let _ = writeln!(out, "parameter delta    {}", self.parameter_delta());
        out
    }
}

/// Trains the plain Transformer and the LISTA-Transformer on the same split
/// with the same seeds and compares their test accuracy.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblationSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg.dataset_dir())?;
    let split = split_of(&data, cfg.split_seed())?;
    let test = select(&data, &split.test);
    let run = |architecture: Architecture| -> Result<AblationRun> {
        let config = cfg.model.with_architecture(architecture);
        config.validate()?;
        let outcome = fit(cfg, &config, &data, &split)?;
        let best_val_accuracy = outcome
            .best_epoch
            .map_or(f64::NAN, |e| outcome.history[e - 1].val_accuracy);
        Ok(AblationRun {
            config,
            parameters: parameter_count(&config),
            best_val_accuracy,
            test: evaluate(&outcome.params, &config, &test)?,
        })
    };
    let summary = AblationSummary {
        transformer: run(Architecture::Transformer)?,
        lista_transformer: run(Architecture::ListaTransformer)?,
    };
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join(ABLATION_FILE), summary.table())?;
    Ok(summary)
}
