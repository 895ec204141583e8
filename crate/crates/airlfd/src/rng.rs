//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 keyed by a 64-bit seed, with the stream
//! id selecting an independent substream. Normals use the cosine branch of
//! Box-Muller so the sequence is easy to reproduce outside Rust.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Independent generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in [0, 1).
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Standard normal draw consuming exactly two uniforms.
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - uniform(rng); // (0, 1]
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Fisher-Yates shuffle driven by `uniform`.
pub fn shuffle<T, R: Rng + ?Sized>(xs: &mut [T], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

// Stream ids used across the crate.
pub const STREAM_INIT_POLICY: u64 = 1 << 32;
pub const STREAM_INIT_REWARD: u64 = (1 << 32) + 1;
pub const STREAM_INIT_VALUE: u64 = (1 << 32) + 2;
pub const STREAM_TRAIN: u64 = (1 << 32) + 3;
pub const STREAM_SPLIT: u64 = (1 << 32) + 4;
pub const STREAM_BASELINE: u64 = (1 << 32) + 5;
