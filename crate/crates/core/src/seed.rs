//! Deterministic seed derivation.
//!
//! Every randomized stage (simulation, injection, per-tree sampling, training,
//! sweep cells) owns a seed derived from a master seed and a list of integer
//! coordinates. The derivation is a fixed splitmix64 chain, so parallel and
//! serial executions of the same plan draw identical streams.

/// splitmix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a list of coordinates.
///
/// Order-sensitive: `derive(m, &[1, 2]) != derive(m, &[2, 1])`.
pub fn derive(master: u64, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x6f64_6175_6469_7421);
    for &c in coords {
        h = splitmix64(h ^ c);
    }
    h
}
