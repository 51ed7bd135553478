//! Explicitly seeded random streams.
//!
//! Every operation that consumes randomness takes the stream as an argument.
//! Independent sub-streams (per seed, per repetition, per draw) are derived
//! with [`substream`], which selects a ChaCha stream id so that children never
//! overlap their parent or each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn seeded(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child stream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
