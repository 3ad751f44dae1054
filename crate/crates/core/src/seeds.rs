//! Per-task seed derivation.
//!
//! Every random decision in a run descends from one `u64` run seed. A task
//! seed is `splitmix64(run_seed ^ fnv1a(tag) ^ splitmix64(index))`, so seeds
//! for different tags or indices are decorrelated while staying a pure
//! function of `(run_seed, tag, index)`.

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive(run_seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(run_seed ^ fnv1a(tag) ^ splitmix64(index))
}

/// `count` seeds for one tag.
pub fn derive_many(run_seed: u64, tag: &str, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive(run_seed, tag, i)).collect()
}
