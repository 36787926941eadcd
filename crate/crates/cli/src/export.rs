use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use listaformer_core::signal::load_signal;
use listaformer_core::timefreq::{compute, map_to_pgm, to_image};
use listaformer_core::{Image, SignalFormat};

use crate::config::RunConfig;

#[derive(Debug, Clone)]
pub struct ExportSummary {
    pub map_file: PathBuf,
    pub image_file: PathBuf,
    /// Rows × columns of the raw map.
    pub map_shape: (usize, usize),
    pub image: Image,
}

/// Writes the full-resolution map of one signal and its pooled classifier
/// image as PGM files named `<stem>_<transform>.pgm` and
/// `<stem>_<transform>_<size>.pgm` in `out_dir`.
pub fn cmd_export_tfmap(signal_path: &Path, cfg: &RunConfig) -> Result<ExportSummary> {
    let signal = load_signal(signal_path, SignalFormat::from_path(signal_path), cfg.sample_rate_hz)
        .with_context(|| format!("loading {}", signal_path.display()))?;
    let map = compute(&signal, cfg.transform, &cfg.transform_params)?;
    let image = to_image(&map, cfg.model.image_size)?;

    let stem = signal_path.file_stem().and_then(|s| s.to_str()).unwrap_or("signal");
    let kind = cfg.transform.name();
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let map_file = cfg.out_dir.join(format!("{stem}_{kind}.pgm"));
    let image_file = cfg.out_dir.join(format!("{stem}_{kind}_{}.pgm", image.size()));
    fs::write(&map_file, map_to_pgm(&map))?;
    fs::write(&image_file, image.to_pgm())?;
    Ok(ExportSummary {
        map_file,
        image_file,
        map_shape: (map.rows(), map.cols()),
        image,
    })
}
