//! Seed derivation.
//!
//! All randomness flows through ChaCha8, a counter-based generator. Trials are
//! seeded as `seed ^ trial`, and independent streams (points, choices, one
//! stream per vertex) are selected with `set_stream`, so every draw depends
//! only on its own coordinates and never on iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for point coordinates.
pub const POINT_STREAM: u64 = 0;

/// Seed of trial `trial` in a batch seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used for the neighbor choices of a trial whose points used `seed`.
pub fn choice_seed(seed: u64) -> u64 {
    mix64(seed ^ 0x6368_6f69_6365_7321)
}

/// Generator for a given seed and stream.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-vertex generator: a private stream keyed by the vertex id.
pub fn vertex_stream(seed: u64, vertex: usize) -> ChaCha8Rng {
    stream(seed, (vertex as u64).wrapping_add(1))
}
