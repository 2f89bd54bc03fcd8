//! Per-replicate random streams.
//!
//! Every random draw is taken from a stream identified by
//! `(seed, replicate, tag, attempt)`, so a replicate's data do not depend on
//! which thread runs it or in what order replicates complete.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Sub-stream tag distinguishing independent draws within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Tag {
    /// Single-dataset procedures (AUC interval, influence).
    Single = 0,
    /// First arm of a two-test comparison.
    Arm1 = 1,
    /// Second arm of a two-test comparison.
    Arm2 = 2,
    /// Synthetic datasets in simulation studies.
    Simulate = 3,
}

/// Stream for `replicate` (< 2^40) and redraw `attempt` under `seed`.
pub fn replicate_stream(seed: u64, replicate: u64, tag: Tag, attempt: u16) -> StreamRng {
    debug_assert!(replicate < 1 << 40);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 24) | ((tag as u64) << 16) | attempt as u64);
    rng
}

/// SplitMix64 finaliser applied to `seed + index`; used to hand child
/// procedures (e.g. the bootstrap inside a simulation replication) their own seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
