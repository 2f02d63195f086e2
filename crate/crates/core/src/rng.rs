//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` whose seed is a
//! pure function of a parent seed and a path of indices. Parallel workers
//! therefore see the same streams regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes that get their own branch of the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Series = 1,
    PhiBootstrap = 2,
    Replicate = 3,
    ReplicateBackfit = 4,
    Replication = 5,
    ReplicationTest = 6,
    ReplicationBackfit = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(parent, stream, index)`.
pub fn derive_seed(parent: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(parent ^ (stream as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(a ^ splitmix64(index.wrapping_add(0xe703_7ed1_a0b4_28db)))
}

pub fn rng_for(parent: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, stream, index))
}
