use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::transform;
use super::hilbert::analytic_signal;
use super::{Result, TimeFreqMap, TransformError, TransformKind};
use crate::signal::Signal;

/// Pseudo Wigner-Ville distribution of the analytic signal of `x`.
///
/// Going through the analytic signal removes the interference between the
/// positive- and negative-frequency halves of a real signal.
pub fn wvd(x: &Signal, win_len: usize) -> Result<TimeFreqMap> {
    check_window(win_len, x.len())?;
    let z = analytic_signal(x.samples())?;
    wvd_of_analytic(&z, x.sample_rate_hz(), win_len)
}

fn check_window(win_len: usize, len: usize) -> Result<()> {
    if win_len == 0 {
        return Err(TransformError::EmptyWindow);
    }
    if win_len % 2 == 0 {
        return Err(TransformError::EvenWindow(win_len));
    }
    if win_len > len {
        return Err(TransformError::WindowTooLong { win_len, len });
    }
    Ok(())
}

/// Pseudo-WVD of a complex sequence with a Hann lag window of `win_len`
/// (odd) taps.
///
/// For each time `t` the lag products `s[t+m]·s*[t−m]·w[m]`, `|m| ≤ L`, are
/// transformed over `m` with an `N = win_len` point DFT. Because the lag
/// step is two samples, bin `k` sits at `k·fs/(2N)` and the rows cover
/// `[0, fs/2)`. Lags are truncated where `t ± m` leaves the signal.
pub fn wvd_of_analytic(z: &[Complex64], fs: f64, win_len: usize) -> Result<TimeFreqMap> {
    check_window(win_len, z.len())?;
    let n = win_len;
    let half = (n - 1) / 2;
    let lag_window: Vec<f64> = (0..=half)
        .map(|m| 0.5 + 0.5 * (2.0 * PI * m as f64 / (n + 1) as f64).cos())
        .collect();
    let len = z.len();
    let mut values = vec![0.0; n * len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..len {
        buf.fill(Complex64::new(0.0, 0.0));
        let max_lag = half.min(t).min(len - 1 - t);
        for m in 0..=max_lag {
            let r = z[t + m] * z[t - m].conj() * lag_window[m];
            buf[m] = r;
            if m > 0 {
                buf[n - m] = r.conj();
            }
        }
        transform(&mut buf, false);
        for k in 0..n {
            values[k * len + t] = buf[k].norm();
        }
    }
    let row_axis = (0..n).map(|k| k as f64 * fs / (2.0 * n as f64)).collect();
    let col_axis = (0..len).map(|t| t as f64 / fs).collect();
    Ok(TimeFreqMap::new(values, row_axis, col_axis, TransformKind::Wvd))
}

/// Plain WVD of a real signal without the analytic step. Only used to show
/// the extra interference terms in tests.
#[cfg(test)]
pub(crate) fn wvd_real(x: &Signal, win_len: usize) -> Result<TimeFreqMap> {
    let z: Vec<Complex64> = x.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    wvd_of_analytic(&z, x.sample_rate_hz(), win_len)
}
