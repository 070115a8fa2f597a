//! Seeded RNG helpers.
//!
//! Every stochastic element of a run (init, shuffles, dropout masks, flips,
//! reservoir insertion) draws from a ChaCha8 stream derived from the run seed
//! and a string tag, so runs are reproducible bit-for-bit across processes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The deterministic RNG used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Build an RNG from a bare seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a sub-seed from a base seed and a structured tag.
///
/// FNV-1a over the tag bytes mixed with the base seed; stable across
/// platforms and releases.
pub fn subseed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base.wrapping_mul(0x100000001b3);
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive a sub-RNG for a tagged sub-task of a run.
pub fn subrng(base: u64, tag: &str) -> SeededRng {
    rng_from_seed(subseed(base, tag))
}

/// Standard normal draw via Box-Muller; avoids a distribution dependency and
/// pins the exact sampling algorithm.
pub fn normal(rng: &mut SeededRng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform draw in [lo, hi).
pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + u * (hi - lo)
}

/// Fisher-Yates shuffle of an index vector.
pub fn shuffled_indices(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
