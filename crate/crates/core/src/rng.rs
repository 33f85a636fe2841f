//! Deterministic seed derivation: a 64-bit mixing hash used for per-episode
//! RNG streams and for hash-derived jitter values, so results do not depend
//! on execution order or thread count.

/// Mixes two 64-bit values (splitmix64 finalizer over their combination).
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for episode `index` under `master`; stable across parallelism.
pub fn episode_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(0xa076_1d64_78bd_642f), index)
}

/// Maps a hash to the open unit interval (never exactly 0 or 1).
pub fn unit_from_hash(x: u64) -> f64 {
    (((x >> 12) as f64) + 0.5) / (1u64 << 52) as f64
}
