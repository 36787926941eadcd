use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::transform;
use super::{Result, TimeFreqMap, TransformError, TransformKind};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann, `w[n] = 0.5 − 0.5·cos(2πn/N)`.
    Hann,
    Rect,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Magnitude STFT over the non-negative half spectrum.
///
/// Frame `t` covers samples `[t·hop, t·hop + win_len)`; frames that would run
/// past the end are dropped. Rows are bins `k·fs/win_len` for
/// `k = 0..=win_len/2`; the column time is the frame centre.
pub fn stft(x: &Signal, win_len: usize, hop: usize, window: Window) -> Result<TimeFreqMap> {
    let len = x.len();
    if win_len == 0 {
        return Err(TransformError::EmptyWindow);
    }
    if win_len > len {
        return Err(TransformError::WindowTooLong { win_len, len });
    }
    if hop == 0 || hop > win_len {
        return Err(TransformError::InvalidHop { hop, win_len });
    }
    let fs = x.sample_rate_hz();
    let w = window.coefficients(win_len);
    let frames = (len - win_len) / hop + 1;
    let bins = win_len / 2 + 1;
    let samples = x.samples();

    let mut values = vec![0.0; bins * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); win_len];
    for t in 0..frames {
        let start = t * hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(samples[start + n] * w[n], 0.0);
        }
        transform(&mut buf, false);
        for k in 0..bins {
            values[k * frames + t] = buf[k].norm();
        }
    }
    let row_axis = (0..bins).map(|k| k as f64 * fs / win_len as f64).collect();
    let col_axis = (0..frames)
        .map(|t| (t * hop) as f64 / fs + win_len as f64 / (2.0 * fs))
        .collect();
    Ok(TimeFreqMap::new(values, row_axis, col_axis, TransformKind::Stft))
}
