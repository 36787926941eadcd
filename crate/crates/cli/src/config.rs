use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use listaformer_core::model::TrainConfig;
use listaformer_core::signal::REFERENCE_SAMPLE_RATE_HZ;
use listaformer_core::timefreq::TransformParams;
use listaformer_core::{ModelConfig, TransformKind, XorShift64Star};

/// Everything a command needs. Built from defaults, then a config file,
/// then command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub transform: TransformKind,
    pub transform_params: TransformParams,
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Raw signals for `preprocess`; the image dataset for the other
    /// commands (falls back to `out_dir`).
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Generate this many synthetic signals instead of reading `data_dir`.
    pub synthetic: Option<usize>,
    pub signal_len: usize,
    pub sample_rate_hz: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            transform: TransformKind::Cwt,
            transform_params: TransformParams::default(),
            model: ModelConfig::default(),
            epochs: train.epochs,
            lr: train.lr,
            batch: train.batch,
            seed: 0,
            data_dir: None,
            out_dir: PathBuf::from("out"),
            synthetic: None,
            signal_len: 2048,
            sample_rate_hz: REFERENCE_SAMPLE_RATE_HZ,
        }
    }
}

// Independent streams derived from the run seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got {raw:?}", number + 1);
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", number + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn positive<T: std::str::FromStr + PartialOrd + Default>(key: &str, value: &str) -> Result<T> {
            match value.parse::<T>() {
                Ok(v) if v > T::default() => Ok(v),
                _ => bail!("{key} must be a positive number, got {value:?}"),
            }
        }
        match key {
            "transform" => self.transform = value.parse()?,
            "epochs" => self.epochs = positive(key, value)?,
            "lr" => self.lr = positive(key, value)?,
            "batch" => self.batch = positive(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .with_context(|| format!("seed must be a non-negative integer, got {value:?}"))?
            }
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "synthetic" => self.synthetic = Some(positive(key, value)?),
            "signal_len" => self.signal_len = positive(key, value)?,
            "sample_rate_hz" => self.sample_rate_hz = positive(key, value)?,
            "stft_window" => self.transform_params.stft_window = positive(key, value)?,
            "stft_hop" => self.transform_params.stft_hop = positive(key, value)?,
            "cwt_scales" => self.transform_params.cwt_scales = positive(key, value)?,
            "wvd_window" => self.transform_params.wvd_window = positive(key, value)?,
            "hht_bins" => self.transform_params.hht_bins = positive(key, value)?,
            "hht_max_imfs" => self.transform_params.hht_max_imfs = positive(key, value)?,
            _ => {
                if !self.model.set(key, value)? {
                    bail!("unknown config key {key:?}");
                }
                if key != "architecture" && value.parse::<usize>() == Ok(0) {
                    bail!("{key} must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch: self.batch,
            seed: self.stream(STREAM_SHUFFLE),
            ..TrainConfig::default()
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.stream(STREAM_SPLIT)
    }

    pub fn init_seed(&self) -> u64 {
        self.stream(STREAM_INIT)
    }

    fn stream(&self, index: u64) -> u64 {
        XorShift64Star::new(self.seed).fork(index).next_u64()
    }

    /// Where the image dataset lives for train, eval and ablate.
    pub fn dataset_dir(&self) -> &Path {
        self.data_dir.as_deref().unwrap_or(&self.out_dir)
    }

    /// Every setting as `key = value` lines, re-readable by [`apply_text`](Self::apply_text).
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = &self.transform_params;
        let mut pairs: Vec<(String, String)> = vec![
            ("transform".into(), self.transform.to_string()),
            ("stft_window".into(), p.stft_window.to_string()),
            ("stft_hop".into(), p.stft_hop.to_string()),
            ("cwt_scales".into(), p.cwt_scales.to_string()),
            ("wvd_window".into(), p.wvd_window.to_string()),
            ("hht_bins".into(), p.hht_bins.to_string()),
            ("hht_max_imfs".into(), p.hht_max_imfs.to_string()),
        ];
        pairs.extend(self.model.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
        pairs.extend([
            ("epochs".into(), self.epochs.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("signal_len".into(), self.signal_len.to_string()),
            ("sample_rate_hz".into(), self.sample_rate_hz.to_string()),
            ("out_dir".into(), self.out_dir.display().to_string()),
        ]);
        if let Some(dir) = &self.data_dir {
            pairs.push(("data_dir".into(), dir.display().to_string()));
        }
        if let Some(n) = self.synthetic {
            pairs.push(("synthetic".into(), n.to_string()));
        }
        pairs
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_pairs() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
