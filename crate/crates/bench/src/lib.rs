//! Shared benchmark inputs.

use listaformer_core::signal::{gen_synthetic, REFERENCE_SAMPLE_RATE_HZ};
use listaformer_core::sparse::{gaussian_dictionary, random_problem, ProblemSpec, SparseProblem};
use listaformer_core::{Image, Signal, XorShift64Star};

/// An inner-race synthetic signal of `len` samples at 12 kHz.
pub fn fault_signal(len: usize) -> Signal {
    gen_synthetic(1, 7, len, REFERENCE_SAMPLE_RATE_HZ)
        .expect("valid synthetic parameters")
        .signal
}

pub fn sparse_instance(m: usize, n: usize, seed: u64) -> SparseProblem {
    let mut rng = XorShift64Star::new(seed);
    let w = gaussian_dictionary(&mut rng, m, n);
    random_problem(&mut rng, &w, ProblemSpec::default()).expect("consistent dimensions")
}

pub fn noise_image(size: usize, seed: u64) -> Image {
    let mut rng = XorShift64Star::new(seed);
    Image::new(size, (0..size * size).map(|_| rng.next_f64()).collect())
}
