//! Seeded random source used for every random draw in the crate.
//!
//! The generator is ChaCha8 keyed through `seed_from_u64`, whose stream is
//! stable across platforms and crate versions. Uniform doubles take the top
//! 53 bits of each `u64` output, so a seed fully pins every kernel and every
//! synthetic noise buffer.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct Prng(ChaCha8Rng);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Derives an independent child seed, e.g. one per layer of a stack.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_pinned() {
        let mut r = Prng::new(0);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        let mut again = Prng::new(0);
        assert_eq!(first, (0..3).map(|_| again.next_u64()).collect::<Vec<_>>());
        assert_eq!(first, GOLDEN_SEED0);
    }

    // First three outputs of seed 0; changing the generator breaks every
    // seeded figure, so this is frozen.
    const GOLDEN_SEED0: [u64; 3] = [
        13080132717333068652,
        8594738769458413623,
        12896916468484187878,
    ];

    #[test]
    fn uniform_stays_in_range() {
        let mut r = Prng::new(42);
        for _ in 0..10_000 {
            let v = r.uniform(-0.5, 0.25);
            assert!((-0.5..0.25).contains(&v));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..16).map(|i| derive_seed(7, i)).collect();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
