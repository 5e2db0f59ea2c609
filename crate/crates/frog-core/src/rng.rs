//! Deterministic randomness: one master seed fans out to named sub-seeds so
//! that independent components (init, shuffling, sampling, evaluation) draw
//! from decoupled streams. ChaCha8 is used everywhere because its output is
//! stable across platforms and library versions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable, dependency-free.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; decorrelates nearby inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a named sub-seed from a master seed.
pub fn sub_seed(master: u64, label: &str) -> u64 {
    mix(master ^ fnv1a(label.as_bytes()))
}

/// Derives an indexed sub-seed, e.g. one per epoch or per query.
pub fn sub_seed_n(master: u64, label: &str, n: u64) -> u64 {
    mix(sub_seed(master, label) ^ mix(n))
}

/// Seeded generator for a named stream.
pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, label))
}

/// Seeded generator for an indexed stream.
pub fn stream_n(master: u64, label: &str, n: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed_n(master, label, n))
}
