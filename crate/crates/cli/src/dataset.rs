//! On-disk image datasets.
//!
//! A dataset directory holds `manifest.csv` and an `images/` folder. Each
//! manifest line is `images/NNNNN.f64,LABEL`, where the image file is the
//! row-major pixel array as little-endian `f64` and `LABEL` is the class index.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use listaformer_core::model::LabeledImage;
use listaformer_core::signal::{decode_raw_f64le, encode_raw_f64le, load_signal, LabeledSample, NUM_CLASSES};
use listaformer_core::{FaultClass, Image, SignalFormat};

pub const MANIFEST: &str = "manifest.csv";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the dataset directory.
    pub path: String,
    pub label: usize,
}

pub fn image_file_name(index: usize) -> String {
    format!("{IMAGE_DIR}/{index:05}.f64")
}

pub fn encode_manifest(entries: &[ManifestEntry]) -> String {
    entries.iter().map(|e| format!("{},{}\n", e.path, e.label)).collect()
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (path, label) = line
                .rsplit_once(',')
                .with_context(|| format!("manifest line {}: expected `path,label`", i + 1))?;
            let label = FaultClass::parse(label)
                .with_context(|| format!("manifest line {}: bad label {label:?}", i + 1))?
                .index();
            Ok(ManifestEntry {
                path: path.trim().to_string(),
                label,
            })
        })
        .collect()
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    fs::write(path, encode_raw_f64le(image.pixels())).with_context(|| format!("writing {}", path.display()))
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let pixels = decode_raw_f64le(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    let size = (pixels.len() as f64).sqrt().round() as usize;
    ensure!(size * size == pixels.len(), "{}: {} pixels is not a square image", path.display(), pixels.len());
    Ok(Image::new(size, pixels))
}

/// Loads every image listed in `dir/manifest.csv`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<LabeledImage>> {
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest)
        .with_context(|| format!("no dataset at {} (run `preprocess` first)", dir.display()))?;
    let entries = parse_manifest(&text)?;
    ensure!(!entries.is_empty(), "{} lists no images", manifest.display());
    let samples = entries
        .iter()
        .map(|e| {
            Ok(LabeledImage {
                image: read_image(&dir.join(&e.path))?,
                label: e.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let size = samples[0].image.size();
    if let Some(odd) = samples.iter().position(|s| s.image.size() != size) {
        bail!("{}: image sizes differ ({} vs {size})", entries[odd].path, samples[odd].image.size());
    }
    Ok(samples)
}

/// Reads labeled signals from class-named subdirectories of `dir`
/// (`normal/`, `ir/`, `or/`, `ball/`, or `0/`..`3/`).
///
/// Files ending in `.csv` or `.txt` are parsed as text; anything else as raw
/// little-endian `f64`. Classes and files are visited in sorted order, so
/// the result is independent of directory listing order.
pub fn load_signal_dir(dir: &Path, sample_rate_hz: f64) -> Result<Vec<LabeledSample>> {
    ensure!(dir.is_dir(), "data directory {} does not exist", dir.display());
    let mut classes: Vec<(usize, PathBuf)> = Vec::new();
    for entry in sorted_entries(dir)? {
        if !entry.is_dir() {
            continue;
        }
        let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let class = FaultClass::parse(name)
            .with_context(|| format!("{}: directory name is not a class tag", entry.display()))?;
        classes.push((class.index(), entry));
    }
    classes.sort();
    let mut samples = Vec::new();
    for (label, class_dir) in classes {
        for file in sorted_entries(&class_dir)? {
            if !file.is_file() {
                continue;
            }
            let signal = load_signal(&file, SignalFormat::from_path(&file), sample_rate_hz)
                .with_context(|| format!("loading {}", file.display()))?;
            samples.push(LabeledSample { signal, label });
        }
    }
    ensure!(!samples.is_empty(), "no signals under {}", dir.display());
    debug_assert!(samples.iter().all(|s| s.label < NUM_CLASSES));
    Ok(samples)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_accepts_tags() {
        let entries = vec![
            ManifestEntry { path: image_file_name(0), label: 2 },
            ManifestEntry { path: image_file_name(1), label: 0 },
        ];
        let text = encode_manifest(&entries);
        assert_eq!(text, "images/00000.f64,2\nimages/00001.f64,0\n");
        assert_eq!(parse_manifest(&text).unwrap(), entries);
        assert_eq!(parse_manifest("a.f64,ball\n").unwrap()[0].label, 3);
        assert!(parse_manifest("a.f64,7\n").is_err());
        assert!(parse_manifest("nolabel\n").is_err());
    }
}
