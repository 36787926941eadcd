//! Portable deterministic random numbers.
//!
//! Every stochastic step in the crate (synthetic signals, dataset splits,
//! weight initialization, mini-batch shuffling) draws from [`XorShift64Star`]
//! so results are bit-identical across platforms for a given seed.

use std::f64::consts::PI;

/// xorshift64* generator (Vigna, 2014).
///
/// State update uses the shift triple (12, 25, 27) and the output is
/// multiplied by `0x2545_F491_4F6C_DD1D`. The seed is XORed with
/// `0x9E37_79B9_7F4A_7C15` so that seed 0 yields a valid nonzero state.
/// Gaussian draws use the basic Box-Muller transform, caching the second
/// variate of each pair.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
    spare_normal: Option<f64>,
}

const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;
const OUTPUT_MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut state = seed ^ SEED_MIX;
        if state == 0 {
            state = SEED_MIX;
        }
        Self {
            state,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(OUTPUT_MULTIPLIER)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift range reduction; bias is negligible for the sizes used here.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn gaussian(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.normal()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Derives an independent generator for sub-task `index`.
    pub fn fork(&mut self, index: u64) -> Self {
        Self::new(self.next_u64() ^ index.wrapping_mul(OUTPUT_MULTIPLIER))
    }
}
