//! Signal to time-frequency map transforms.
//!
//! Four transforms share one output type, [`TimeFreqMap`]: the short-time
//! Fourier transform, the Morlet continuous wavelet transform, the pseudo
//! Wigner-Ville distribution and the Hilbert-Huang spectrum (EMD followed by
//! Hilbert spectral analysis). [`to_image`] reduces any map to the square
//! `[0, 1]` image the classifier consumes.

mod cwt;
mod emd;
mod fft;
mod hht;
mod hilbert;
mod image;
mod stft;
mod wvd;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::signal::Signal;

pub use cwt::{cwt, cwt_at_scales, cwt_scales, morlet, MORLET_OMEGA0};
pub use emd::{emd, EmdResult, MAX_SIFTS, SIFT_SD_THRESHOLD};
pub use fft::{dft, dft_complex, inverse_dft, spectrum, transform as fft_in_place, ComplexSpectrum};
pub use hht::{hht, hht_from_emd, instantaneous_frequency};
pub use hilbert::analytic_signal;
pub use image::{decode_pgm, encode_pgm, map_to_pgm, pool_to_grid, to_image, Image, IMAGE_SIZE};
pub use stft::{stft, Window};
pub use wvd::{wvd, wvd_of_analytic};

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("window of {win_len} samples exceeds signal length {len}")]
    WindowTooLong { win_len: usize, len: usize },
    #[error("hop must satisfy 1 <= hop <= win_len, got hop {hop} for window {win_len}")]
    InvalidHop { hop: usize, win_len: usize },
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("need at least 2 scales, got {0}")]
    TooFewScales(usize),
    #[error("lag window length must be odd, got {0}")]
    EvenWindow(usize),
    #[error("signal of length {len} is shorter than the required {min}")]
    TooShort { len: usize, min: usize },
    #[error("need at least 2 frequency bins, got {0}")]
    TooFewBins(usize),
    #[error("time-frequency map is empty")]
    EmptyMap,
    #[error("unknown transform {0:?} (expected stft, cwt, wvd or hht)")]
    UnknownTransform(String),
}

pub type Result<T> = std::result::Result<T, TransformError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Stft,
    Cwt,
    Wvd,
    Hht,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] = [
        TransformKind::Stft,
        TransformKind::Cwt,
        TransformKind::Wvd,
        TransformKind::Hht,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Stft => "stft",
            TransformKind::Cwt => "cwt",
            TransformKind::Wvd => "wvd",
            TransformKind::Hht => "hht",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TransformError::UnknownTransform(s.to_string()))
    }
}

/// Non-negative magnitude grid, rows indexed by frequency (Hz) or wavelet
/// scale, columns by time (s). Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqMap {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    row_axis: Vec<f64>,
    col_axis: Vec<f64>,
    kind: TransformKind,
}

impl TimeFreqMap {
    pub(crate) fn new(
        values: Vec<f64>,
        row_axis: Vec<f64>,
        col_axis: Vec<f64>,
        kind: TransformKind,
    ) -> Self {
        let (rows, cols) = (row_axis.len(), col_axis.len());
        debug_assert_eq!(values.len(), rows * cols);
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            values,
            rows,
            cols,
            row_axis,
            col_axis,
            kind,
        }
    }

    /// Builds a map from raw values with unit-spaced axes. Negative or
    /// non-finite values are rejected.
    pub fn from_values(values: Vec<f64>, rows: usize, cols: usize, kind: TransformKind) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(TransformError::EmptyMap);
        }
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "map values must be finite and non-negative"
        );
        Ok(Self::new(
            values,
            (0..rows).map(|r| r as f64).collect(),
            (0..cols).map(|c| c as f64).collect(),
            kind,
        ))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Frequency in Hz per row, or wavelet scale for CWT maps.
    pub fn row_axis(&self) -> &[f64] {
        &self.row_axis
    }

    /// Time in seconds per column.
    pub fn col_axis(&self) -> &[f64] {
        &self.col_axis
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Row index of the largest value in `col` (first on ties).
    pub fn argmax_row(&self, col: usize) -> usize {
        let mut best = 0;
        for r in 1..self.rows {
            if self.get(r, col) > self.get(best, col) {
                best = r;
            }
        }
        best
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-transform resolution parameters used by [`compute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub stft_window: usize,
    pub stft_hop: usize,
    pub cwt_scales: usize,
    pub wvd_window: usize,
    pub hht_bins: usize,
    pub hht_max_imfs: usize,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            stft_window: 128,
            stft_hop: 16,
            cwt_scales: 64,
            wvd_window: 127,
            hht_bins: 128,
            hht_max_imfs: 8,
        }
    }
}

/// Runs the transform of the given kind with `params`.
pub fn compute(signal: &Signal, kind: TransformKind, params: &TransformParams) -> Result<TimeFreqMap> {
    match kind {
        TransformKind::Stft => {
            let win = params.stft_window.min(signal.len());
            stft(signal, win, params.stft_hop.min(win), Window::Hann)
        }
        TransformKind::Cwt => cwt(signal, params.cwt_scales),
        TransformKind::Wvd => {
            let mut win = params.wvd_window.min(signal.len());
            if win % 2 == 0 {
                win -= 1;
            }
            wvd(signal, win)
        }
        TransformKind::Hht => hht(signal, params.hht_bins, params.hht_max_imfs),
    }
}

/// [`compute`] followed by [`to_image`] at the classifier resolution.
pub fn signal_to_image(signal: &Signal, kind: TransformKind, params: &TransformParams) -> Result<Image> {
    to_image(&compute(signal, kind, params)?, IMAGE_SIZE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("CWT".parse::<TransformKind>().unwrap(), TransformKind::Cwt);
        assert!(matches!(
            "wavelet".parse::<TransformKind>(),
            Err(TransformError::UnknownTransform(_))
        ));
    }

    #[test]
    fn zero_signal_maps_to_zero_for_every_transform() {
        let zero = Signal::new(vec![0.0; 512], 8000.0).unwrap();
        for kind in TransformKind::ALL {
            let map = compute(&zero, kind, &TransformParams::default()).unwrap();
            assert!(map.values().iter().all(|&v| v == 0.0), "{kind}");
        }
    }
}
