use std::f64::consts::PI;

use super::emd::{emd, EmdResult};
use super::hilbert::analytic_signal;
use super::{Result, TimeFreqMap, TransformError, TransformKind};
use crate::signal::Signal;

/// Hilbert-Huang spectrum: squared instantaneous amplitude of every IMF,
/// binned by instantaneous frequency.
///
/// Rows are `freq_bins` equally spaced frequencies from 0 to `fs/2`
/// inclusive; each sample contributes to the nearest one. Frequencies
/// outside that range are clipped onto the end bins.
pub fn hht(x: &Signal, freq_bins: usize, max_imfs: usize) -> Result<TimeFreqMap> {
    if freq_bins < 2 {
        return Err(TransformError::TooFewBins(freq_bins));
    }
    let decomposition = emd(x, max_imfs)?;
    hht_from_emd(&decomposition, freq_bins)
}

pub fn hht_from_emd(decomposition: &EmdResult, freq_bins: usize) -> Result<TimeFreqMap> {
    if freq_bins < 2 {
        return Err(TransformError::TooFewBins(freq_bins));
    }
    let residual = &decomposition.residual;
    let (len, fs) = (residual.len(), residual.sample_rate_hz());
    let nyquist = fs / 2.0;
    let bin_width = nyquist / (freq_bins - 1) as f64;
    let mut values = vec![0.0; freq_bins * len];
    for imf in &decomposition.imfs {
        let z = analytic_signal(imf.samples())?;
        let freq = instantaneous_frequency(&z.iter().map(|c| c.arg()).collect::<Vec<_>>(), fs);
        for (t, (zi, f)) in z.iter().zip(&freq).enumerate() {
            let bin = (f / bin_width).round().clamp(0.0, (freq_bins - 1) as f64) as usize;
            values[bin * len + t] += zi.norm_sqr();
        }
    }
    let row_axis = (0..freq_bins).map(|k| k as f64 * bin_width).collect();
    let col_axis = (0..len).map(|t| t as f64 / fs).collect();
    Ok(TimeFreqMap::new(values, row_axis, col_axis, TransformKind::Hht))
}

/// Instantaneous frequency in Hz from wrapped phase samples: the phase is
/// unwrapped, then differentiated with central differences (one-sided at
/// the ends).
pub fn instantaneous_frequency(wrapped_phase: &[f64], fs: f64) -> Vec<f64> {
    let n = wrapped_phase.len();
    let mut phase = wrapped_phase.to_vec();
    for i in 1..n {
        let mut d = phase[i] - phase[i - 1];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        phase[i] = phase[i - 1] + d;
    }
    let to_hz = fs / (2.0 * PI);
    (0..n)
        .map(|i| {
            let slope = match i {
                _ if n < 2 => 0.0,
                0 => phase[1] - phase[0],
                _ if i == n - 1 => phase[n - 1] - phase[n - 2],
                _ => 0.5 * (phase[i + 1] - phase[i - 1]),
            };
            slope * to_hz
        })
        .collect()
}
