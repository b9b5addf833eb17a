//! Small shared helpers.

/// Derives a child seed from a base seed and a salt, splitmix64-style.
/// Used to hand independent, reproducible seeds to nested components
/// (clusterer restarts, per-iteration refinement, per-run streams).
pub(crate) fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
