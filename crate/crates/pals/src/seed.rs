//! Deterministic seed derivation for independent random streams.

/// splitmix64 finalizer; bijective on u64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a stream tag. Distinct tags give
/// well-separated streams; the same (base, tag) pair always gives the same
/// child.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// Stream tags used across the crate. Centralized so no two stages of a
/// generation pipeline can collide.
pub mod tags {
    pub const SBM: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const SPREADERS: u64 = 3;
    pub const SUSCEPTIBLE: u64 = 4;
    pub const OUTCOMES: u64 = 5;
    pub const OBSERVED: u64 = 6;
    pub const TEST_SPLIT: u64 = 7;
    pub const INIT_STATE: u64 = 8;
    pub const GRID: u64 = 9;
}
