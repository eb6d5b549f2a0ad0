//! Seeded, splittable random streams.
//!
//! Every stochastic operation takes an owned [`RngStream`]. A stream is
//! identified by a `(base_seed, stream_id)` pair, so parallel work items can
//! derive independent streams without coordination and a run is reproducible
//! regardless of worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Derive the stream with identifier `stream_id` from `base_seed`.
pub fn stream(base_seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream_id);
    rng
}

/// Mix several indices into a single stream identifier.
///
/// SplitMix64-style finalizer over the concatenated words; collisions across
/// distinct index tuples are as unlikely as 64-bit hash collisions.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}
