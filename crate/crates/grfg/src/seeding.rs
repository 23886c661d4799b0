//! Master-seed splitting.
//!
//! Each random subsystem draws from its own stream derived from the single
//! master seed, so one integer reproduces an entire run and no subsystem can
//! perturb another by consuming a different number of draws. The derivation is
//! one SplitMix64 scramble of `master + stream * GOLDEN`, the same increment
//! SplitMix64 itself uses.

/// Stream ids for everything that consumes randomness. Changing an id changes
/// every run derived from it, so these are append-only.
pub mod stream {
    /// Cross-validation fold assignment.
    pub const FOLDS: u64 = 1;
    /// Agent selecting the first feature group.
    pub const AGENT_GROUP1: u64 = 2;
    /// Agent selecting the operation.
    pub const AGENT_OP: u64 = 3;
    /// Agent selecting the second feature group.
    pub const AGENT_GROUP2: u64 = 4;
    /// Random-forest evaluator (bootstrap and per-split feature sampling).
    pub const FOREST: u64 = 5;
    /// The random baseline policy's selections.
    pub const RDG: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive the seed for one subsystem stream from the master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_mul(GOLDEN)))
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
