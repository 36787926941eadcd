use num_complex::Complex64;

use super::fft::{dft, inverse_dft};
use super::{Result, TransformError};

const MIN_ANALYTIC_LEN: usize = 4;

/// Analytic signal `x + j·H[x]` by one-siding the spectrum.
///
/// Positive-frequency bins are doubled, negative ones zeroed, and the DC and
/// (for even lengths) Nyquist bins kept as they are.
pub fn analytic_signal(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < MIN_ANALYTIC_LEN {
        return Err(TransformError::TooShort {
            len: n,
            min: MIN_ANALYTIC_LEN,
        });
    }
    let mut spec = dft(x);
    let half = n.div_ceil(2);
    for bin in spec.iter_mut().take(half).skip(1) {
        *bin *= 2.0;
    }
    // With even n, bin n/2 is Nyquist and is left untouched.
    let first_negative = n / 2 + 1;
    for bin in spec.iter_mut().skip(first_negative) {
        *bin = Complex64::new(0.0, 0.0);
    }
    let mut z = inverse_dft(&spec);
    // The real part is the input by construction; restore it exactly.
    for (zi, &xi) in z.iter_mut().zip(x) {
        zi.re = xi;
    }
    Ok(z)
}
