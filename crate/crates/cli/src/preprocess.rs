use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use listaformer_core::signal::{gen_synthetic, LabeledSample, NUM_CLASSES};
use listaformer_core::timefreq::{compute, to_image};
use listaformer_core::Image;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{encode_manifest, image_file_name, load_signal_dir, write_image, ManifestEntry, IMAGE_DIR, MANIFEST};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub dir: PathBuf,
    pub count: usize,
    pub per_class: [usize; NUM_CLASSES],
}

/// Seed of the `j`-th synthetic signal of every class.
///
/// The generator mixes the label in, so `(seed, j)` pairs only need to be
/// distinct per class.
pub fn synthetic_seed(seed: u64, j: usize) -> u64 {
    (seed << 32) ^ j as u64
}

/// Signal `i` of a synthetic run: class `i mod 4`, so every class gets
/// `⌊n/4⌋` or `⌈n/4⌉` signals.
pub fn synthetic_sample(cfg: &RunConfig, i: usize) -> Result<LabeledSample> {
    let label = i % NUM_CLASSES;
    Ok(gen_synthetic(
        label,
        synthetic_seed(cfg.seed, i / NUM_CLASSES),
        cfg.signal_len,
        cfg.sample_rate_hz,
    )?)
}

pub fn signal_image(cfg: &RunConfig, sample: &LabeledSample) -> Result<Image> {
    let map = compute(&sample.signal, cfg.transform, &cfg.transform_params)?;
    Ok(to_image(&map, cfg.model.image_size)?)
}

/// Converts every signal to an image and writes the dataset to `out_dir`.
///
/// Signals are transformed in parallel; output names depend only on the
/// signal index, so the files are identical for any thread count.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessSummary> {
    let images: Vec<(usize, Image)> = match cfg.synthetic {
        Some(n) => (0..n)
            .into_par_iter()
            .map(|i| {
                let sample = synthetic_sample(cfg, i)?;
                Ok((sample.label, signal_image(cfg, &sample)?))
            })
            .collect::<Result<_>>()?,
        None => {
            let dir = cfg
                .data_dir
                .as_deref()
                .context("preprocess needs a data directory (data_dir) or --synthetic N")?;
            let samples = load_signal_dir(dir, cfg.sample_rate_hz)?;
            samples
                .par_iter()
                .map(|s| Ok((s.label, signal_image(cfg, s)?)))
                .collect::<Result<_>>()?
        }
    };

    let out = &cfg.out_dir;
    fs::create_dir_all(out.join(IMAGE_DIR)).with_context(|| format!("creating {}", out.display()))?;
    let mut entries = Vec::with_capacity(images.len());
    let mut per_class = [0; NUM_CLASSES];
    for (i, (label, image)) in images.iter().enumerate() {
        let path = image_file_name(i);
        write_image(&out.join(&path), image)?;
        per_class[*label] += 1;
        entries.push(ManifestEntry { path, label: *label });
    }
    fs::write(out.join(MANIFEST), encode_manifest(&entries))?;
    Ok(PreprocessSummary {
        dir: out.clone(),
        count: entries.len(),
        per_class,
    })
}
