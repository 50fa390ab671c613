//! Seed derivation for independent RNG streams.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub(crate) fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed for the `k`-th stream derived from `seed`.
pub(crate) fn stream(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_mul(GOLDEN)
}
