//! Reproducible uniform sampling.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. A uniform draw in `[0, 1)` takes the top 53
//! bits of one `next_u64()` output and scales by `2^-53`. Both steps are
//! platform independent, so a seed identifies a sample sequence exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: ChaCha8Rng,
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        SampleRng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform point in the axis-aligned box `[lower, upper]`.
    pub fn point_in_box(&mut self, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        lower.iter().zip(upper).map(|(&lo, &hi)| self.uniform_in(lo, hi)).collect()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.next_u64() % n
    }
}
