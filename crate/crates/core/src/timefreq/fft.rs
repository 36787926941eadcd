//! Discrete Fourier transform of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey FFT; other
//! lengths go through Bluestein's chirp-z algorithm on a zero-padded
//! power-of-two convolution. Either way the result is the plain DFT sum
//! `X[k] = Σ_n x[n]·exp(−j2πkn/N)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use crate::signal::Signal;

/// Spectrum of a real signal together with its bin spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub bins: Vec<Complex64>,
    pub bin_hz: f64,
}

/// Full DFT of a signal, bin spacing `fs / N`.
pub fn spectrum(signal: &Signal) -> ComplexSpectrum {
    ComplexSpectrum {
        bins: dft(signal.samples()),
        bin_hz: signal.sample_rate_hz() / signal.len() as f64,
    }
}

pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, false);
    buf
}

pub fn dft_complex(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    transform(&mut buf, false);
    buf
}

/// Inverse DFT including the `1/N` factor.
pub fn inverse_dft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    transform(&mut buf, true);
    let scale = 1.0 / buf.len().max(1) as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Unnormalized forward (`e^{−j…}`) or backward (`e^{+j…}`) transform in place.
pub fn transform(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        bluestein(buf, inverse);
    }
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let table = twiddle_table(n, inverse);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Stage twiddles exp(∓j2πk/len) are every (n/len)-th full-size entry.
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * table[k * stride];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Keyed by `(n, inverse)`.
type TwiddleCache = HashMap<(usize, bool), Rc<Vec<Complex64>>>;

thread_local! {
    static TWIDDLES: RefCell<TwiddleCache> = RefCell::new(HashMap::new());
}

/// `exp(∓j2πk/n)` for `k < n/2`, from direct cos/sin evaluation (recurrences
/// drift at large `n`), cached per thread.
fn twiddle_table(n: usize, inverse: bool) -> Rc<Vec<Complex64>> {
    TWIDDLES.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let sign = if inverse { 1.0 } else { -1.0 };
                Rc::new(
                    (0..n / 2)
                        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64))
                        .collect(),
                )
            })
            .clone()
    })
}

fn bluestein(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    // chirp[k] = exp(sign·jπk²/N); k² is reduced mod 2N to keep the angle small.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, sign * PI * k2 / n as f64)
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = buf[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = a[k] * scale * chirp[k];
    }
}
