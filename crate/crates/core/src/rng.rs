//! Counter-keyed random streams.
//!
//! A draw is addressed by `(seed, stream, counter)`: the ChaCha stream id selects
//! the stream and the counter selects a disjoint block of the keystream. The
//! value of a draw never depends on which other draws happened first.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per counter value.
const WORDS_PER_COUNTER: u128 = 1024;

/// Stream ids at or above this value are reserved for non-player consumers.
pub const RESERVED_STREAM_BASE: u64 = 1 << 32;

/// Stream used by the Markov context process.
pub const CONTEXT_STREAM: u64 = RESERVED_STREAM_BASE;

/// Generator positioned at the block for `(seed, stream, counter)`.
pub fn keyed(seed: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(counter) * WORDS_PER_COUNTER);
    rng
}

/// SplitMix64 finalizer, used to combine seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
