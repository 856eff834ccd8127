//! Seed derivation. Every randomized component draws from its own ChaCha
//! stream so that consumption in one stream never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::real::Real;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `(purpose, index)` under a root seed.
pub fn derive(seed: u64, purpose: u32, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) ^ index);
    rng
}

/// Fresh seed for a child computation (per-episode seeds and the like).
pub fn child_seed(seed: u64, purpose: u32, index: u64) -> u64 {
    derive(seed, purpose, index).random()
}

#[inline]
pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

/// Stream purposes. Fixed numbering keeps derived streams stable across
/// refactors.
pub mod purpose {
    pub const EPISODE: u32 = 1;
    pub const EVAL: u32 = 2;
    pub const INIT: u32 = 3;
    pub const BATCH: u32 = 4;
    pub const ACTOR: u32 = 5;
    pub const DIFFUSION: u32 = 6;
    pub const DYNAMICS: u32 = 7;
    pub const SHUFFLE: u32 = 8;
    pub const OOD: u32 = 9;
    pub const IMAGINE: u32 = 10;
    pub const TABULAR: u32 = 11;
}
