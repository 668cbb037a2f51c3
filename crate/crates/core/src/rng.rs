//! Seeded random streams.
//!
//! All randomness in the crate comes from ChaCha8 (`rand_chacha` 0.9) seeded
//! with a 64-bit seed via `SeedableRng::seed_from_u64`, and split into
//! independent streams with `set_stream`. Normal deviates use
//! `rand_distr::StandardNormal` (ziggurat). Both crates are version-pinned by
//! the lockfile, so a seed reproduces the same numbers on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used by `init::random_init` for a standalone matrix.
pub const STREAM_MATRIX: u64 = 0;
/// Layer `l` (1-based) of a network draws from `STREAM_LAYER_BASE + l`.
pub const STREAM_LAYER_BASE: u64 = 0x4c41_5900_0000_0000;
/// Mini-batch shuffling.
pub const STREAM_SHUFFLE: u64 = 0x5348_5546_0000_0000;
/// Synthetic data: teacher matrix, inputs and label noise.
pub const STREAM_TEACHER: u64 = 0x5445_4143_0000_0001;
pub const STREAM_INPUTS: u64 = 0x5445_4143_0000_0002;
pub const STREAM_NOISE: u64 = 0x5445_4143_0000_0003;
/// Start vectors for power iteration.
pub const STREAM_POWER: u64 = 0x504f_5745_0000_0000;

/// Returns the ChaCha8 generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
