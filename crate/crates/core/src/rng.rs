//! Seeded randomness.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! 64-bit seed plus a stream number, so independent consumers of one seed
//! never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `(seed, stream)`; distinct streams of one seed are independent.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random point of the probability simplex with every entry positive.
pub fn interior_simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    // exponential spacings give a uniform draw from the simplex
    let mut raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|p| *p /= total);
    raw
}

/// Uniform draw from `[-1, 1]` rounded to six decimals.
pub fn unit_payoff<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let x: f64 = rng.gen_range(-1.0..=1.0);
    (x * 1e6).round() / 1e6
}
