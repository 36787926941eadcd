use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::transform;
use super::{Result, TimeFreqMap, TransformError, TransformKind};
use crate::signal::Signal;

/// Centre frequency of the complex Morlet mother wavelet (rad per unit time).
pub const MORLET_OMEGA0: f64 = 6.0;

/// Lowest pseudo-frequency, in multiples of `fs / len`.
const MIN_FREQ_CYCLES: f64 = 4.0;

/// `|u|` beyond which `exp(−u²/2)` is exactly zero in `f64`.
const MORLET_SUPPORT: f64 = 40.0;

/// Minimum signal length giving a non-degenerate scale range.
const MIN_CWT_LEN: usize = 16;

/// Complex Morlet `ψ(u) = π^(−1/4)·exp(jω₀u)·exp(−u²/2)`.
pub fn morlet(u: f64) -> Complex64 {
    PI.powf(-0.25) * (-0.5 * u * u).exp() * Complex64::from_polar(1.0, MORLET_OMEGA0 * u)
}

/// Log-spaced scales (in samples) whose pseudo-frequencies `ω₀·fs/(2π·a)`
/// run from `fs/2` down to `4·fs/len`. Scales are returned ascending.
pub fn cwt_scales(len: usize, num_scales: usize) -> Vec<f64> {
    let f_max = 0.5;
    let f_min = MIN_FREQ_CYCLES / len as f64;
    (0..num_scales)
        .map(|i| {
            let frac = i as f64 / (num_scales - 1) as f64;
            let f = f_max * (f_min / f_max).powf(frac);
            MORLET_OMEGA0 / (2.0 * PI * f)
        })
        .collect()
}

/// Morlet scalogram `|CWT(a, b)|` on the [`cwt_scales`] grid, one column per
/// sample.
pub fn cwt(x: &Signal, num_scales: usize) -> Result<TimeFreqMap> {
    if num_scales < 2 {
        return Err(TransformError::TooFewScales(num_scales));
    }
    if x.len() < MIN_CWT_LEN {
        return Err(TransformError::TooShort {
            len: x.len(),
            min: MIN_CWT_LEN,
        });
    }
    let scales = cwt_scales(x.len(), num_scales);
    let coeffs = cwt_at_scales(x.samples(), &scales);
    let values = coeffs.iter().flatten().map(|c| c.norm()).collect();
    let fs = x.sample_rate_hz();
    let col_axis = (0..x.len()).map(|b| b as f64 / fs).collect();
    Ok(TimeFreqMap::new(values, scales, col_axis, TransformKind::Cwt))
}

/// Complex coefficients `Σ_t x[t]·a^(−1/2)·ψ*((t−b)/a)` for every scale `a`
/// (in samples) and shift `b = 0..len`.
///
/// Each scale is one frequency-domain multiplication. For the Morlet
/// wavelet the correlation kernel `a^(−1/2)·ψ*(−n/a)` equals
/// `a^(−1/2)·ψ(n/a)`, so the sum is the linear convolution of `x` with the
/// sampled kernel. With a transform length of at least `2·len − 1` the
/// circular convolution reproduces it exactly.
pub fn cwt_at_scales(x: &[f64], scales: &[f64]) -> Vec<Vec<Complex64>> {
    let len = x.len();
    let nfft = (2 * len).next_power_of_two();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); nfft];
    for (slot, &v) in spectrum.iter_mut().zip(x) {
        *slot = Complex64::new(v, 0.0);
    }
    transform(&mut spectrum, false);

    let inv_n = 1.0 / nfft as f64;
    let mut kernel = vec![Complex64::new(0.0, 0.0); nfft];
    scales
        .iter()
        .map(|&a| {
            let norm = 1.0 / a.sqrt();
            kernel.fill(Complex64::new(0.0, 0.0));
            // Lags beyond ±(len − 1) never reach an output sample, and past
            // |u| = 40 the Gaussian envelope underflows to exactly zero.
            let reach = ((MORLET_SUPPORT * a).ceil() as usize).min(len);
            kernel[0] = morlet(0.0) * norm;
            for n in 1..reach {
                kernel[n] = morlet(n as f64 / a) * norm;
                kernel[nfft - n] = morlet(-(n as f64) / a) * norm;
            }
            transform(&mut kernel, false);
            for (k, s) in kernel.iter_mut().zip(&spectrum) {
                *k *= s;
            }
            transform(&mut kernel, true);
            kernel[..len].iter().map(|c| c * inv_n).collect()
        })
        .collect()
}
