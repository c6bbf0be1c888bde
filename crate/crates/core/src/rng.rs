//! Seeded randomness.
//!
//! Every protocol run owns one [`RunRng`]. Draw order within a run is
//! fixed: the rounding seed `t_1` first, then one token per public
//! transaction in execution order, then one shuffle per sealed public
//! round. Replaying the same seed reproduces the same trace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

pub fn run_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for trial `index` of a batch started from `master`.
///
/// A splitmix64 finalizer over the pair, so sub-seeds depend only on
/// `(master, index)` and trials can run in any order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
