//! Seeded random number generation.
//!
//! Every stochastic routine in the crate draws from [`Rng`], a SplitMix64
//! generator whose 64-bit state is initialised directly from the user seed.
//! The stream for a given seed is therefore fixed by the algorithm and does
//! not depend on platform or thread count.

use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};
use rand_xoshiro::SplitMix64;

pub type Rng = SplitMix64;

pub fn seeded(seed: u64) -> Rng {
    SplitMix64::seed_from_u64(seed)
}

/// Derive an independent seed for a sub-stream (per run, per layer, ...).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // one SplitMix64 output step over the combined key
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal(rng: &mut Rng, mean: f64, std: f64) -> f64 {
    Normal::new(mean, std)
        .expect("standard deviation must be finite and non-negative")
        .sample(rng)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn unit(rng: &mut Rng) -> f64 {
    rng.random::<f64>()
}

pub fn index(rng: &mut Rng, upper: usize) -> usize {
    rng.random_range(0..upper)
}
