//! Keyed random streams.
//!
//! Every random draw in the engine comes from a ChaCha stream whose seed is a
//! pure function of `(master_seed, key parts)`. Task scheduling and worker
//! count therefore never influence results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive combination of key parts into one 64-bit key.
pub fn combine(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN, |acc, &p| {
        mix64(acc.rotate_left(17) ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

/// Stable 64-bit FNV-1a hash of a string label.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent stream for `(master_seed, parts...)`.
pub fn stream(master_seed: u64, parts: &[u64]) -> StreamRng {
    let mut state = combine(&[master_seed, combine(parts)]);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
