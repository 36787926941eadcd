//! Empirical mode decomposition by envelope-mean sifting.

use super::{Result, TransformError};
use crate::signal::Signal;

/// Cauchy-type sifting stop threshold on `Σ(h_prev − h)² / Σ h_prev²`.
pub const SIFT_SD_THRESHOLD: f64 = 0.3;
/// Upper bound on sifting passes per IMF.
pub const MAX_SIFTS: usize = 10;

const MIN_EMD_LEN: usize = 16;
/// Extraction stops once the residual has fewer extrema than this.
const MIN_EXTREMA: usize = 4;
/// Number of extrema mirrored past each end before spline fitting.
const MIRRORED_EXTREMA: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult {
    pub imfs: Vec<Signal>,
    pub residual: Signal,
}

impl EmdResult {
    /// `Σ imfs + residual`, which reproduces the input.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.samples().to_vec();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf.samples()) {
                *o += v;
            }
        }
        out
    }
}

/// Decomposes `x` into at most `max_imfs` intrinsic mode functions.
///
/// Each IMF is sifted by subtracting the mean of the cubic-spline envelopes
/// through the maxima and minima (extrema mirrored about both ends), until
/// the SD criterion drops below [`SIFT_SD_THRESHOLD`] or [`MAX_SIFTS`]
/// passes elapse.
pub fn emd(x: &Signal, max_imfs: usize) -> Result<EmdResult> {
    let n = x.len();
    if n < MIN_EMD_LEN {
        return Err(TransformError::TooShort {
            len: n,
            min: MIN_EMD_LEN,
        });
    }
    let fs = x.sample_rate_hz();
    let mut residual = x.samples().to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < max_imfs {
        let (maxima, minima) = extrema(&residual);
        if maxima.len() + minima.len() < MIN_EXTREMA {
            break;
        }
        let Some(imf) = sift(&residual) else { break };
        for (r, c) in residual.iter_mut().zip(&imf) {
            *r -= c;
        }
        imfs.push(Signal::new(imf, fs).expect("finite IMF"));
    }
    Ok(EmdResult {
        imfs,
        residual: Signal::new(residual, fs).expect("finite residual"),
    })
}

fn sift(signal: &[f64]) -> Option<Vec<f64>> {
    let mut h = signal.to_vec();
    for pass in 0..MAX_SIFTS {
        let Some(mean) = envelope_mean(&h) else {
            // Envelopes cannot be formed; accept what has been sifted so far.
            return if pass == 0 { None } else { Some(h) };
        };
        let energy: f64 = h.iter().map(|v| v * v).sum();
        let change: f64 = mean.iter().map(|m| m * m).sum();
        for (hi, m) in h.iter_mut().zip(&mean) {
            *hi -= m;
        }
        if energy == 0.0 || change / energy < SIFT_SD_THRESHOLD {
            break;
        }
    }
    Some(h)
}

/// `(e_max + e_min) / 2` evaluated at every sample.
fn envelope_mean(h: &[f64]) -> Option<Vec<f64>> {
    let (maxima, minima) = extrema(h);
    if maxima.is_empty() || minima.is_empty() {
        return None;
    }
    let upper = envelope(h, &maxima)?;
    let lower = envelope(h, &minima)?;
    Some(upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect())
}

/// Indices of strict local maxima and minima. Plateaus count once, at their
/// first sample.
fn extrema(h: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let n = h.len();
    let mut i = 1;
    while i + 1 < n {
        if h[i] == h[i - 1] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && h[j + 1] == h[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        if h[i] > h[i - 1] && h[i] > h[j + 1] {
            maxima.push(i);
        } else if h[i] < h[i - 1] && h[i] < h[j + 1] {
            minima.push(i);
        }
        i = j + 1;
    }
    (maxima, minima)
}

/// Natural cubic spline through the given extrema plus their mirror images
/// about the first and last sample.
fn envelope(h: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let n = h.len();
    let last = (n - 1) as f64;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(idx.len() + 2 * MIRRORED_EXTREMA);
    for &i in idx.iter().take(MIRRORED_EXTREMA).rev() {
        if i > 0 {
            knots.push((-(i as f64), h[i]));
        }
    }
    knots.extend(idx.iter().map(|&i| (i as f64, h[i])));
    for &i in idx.iter().rev().take(MIRRORED_EXTREMA) {
        if i < n - 1 {
            knots.push((2.0 * last - i as f64, h[i]));
        }
    }
    if knots.len() < 2 {
        return None;
    }
    Some(natural_spline(&knots, n))
}

/// Evaluates the natural cubic spline through `knots` (strictly increasing
/// abscissae) at `0, 1, …, n−1`.
fn natural_spline(knots: &[(f64, f64)], n: usize) -> Vec<f64> {
    let k = knots.len();
    if k == 2 {
        let ((x0, y0), (x1, y1)) = (knots[0], knots[1]);
        return (0..n)
            .map(|t| y0 + (y1 - y0) * (t as f64 - x0) / (x1 - x0))
            .collect();
    }
    let xs: Vec<f64> = knots.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = knots.iter().map(|p| p.1).collect();
    let hs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    let m = k - 2;
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        diag[i] = 2.0 * (hs[i] + hs[i + 1]);
        upper[i] = hs[i + 1];
        rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / hs[i + 1] - (ys[i + 1] - ys[i]) / hs[i]);
    }
    for i in 1..m {
        let w = hs[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut second = vec![0.0; k];
    for i in (0..m).rev() {
        let next = if i + 1 < m { second[i + 2] } else { 0.0 };
        second[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
    }

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for t in 0..n {
        let x = t as f64;
        while seg + 2 < k && x > xs[seg + 1] {
            seg += 1;
        }
        let h = hs[seg];
        let a = (xs[seg + 1] - x) / h;
        let b = (x - xs[seg]) / h;
        out.push(
            a * ys[seg]
                + b * ys[seg + 1]
                + ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / 6.0,
        );
    }
    out
}
