//! Named, reproducible random streams.
//!
//! Every stochastic routine in the crate draws from a ChaCha12 generator whose
//! 256-bit seed is built from a master seed plus up to three path words
//! identifying the consumer (purpose tag, replicate index, sub-replicate
//! index). Streams with different paths are independent, replicates can run in
//! parallel in any order, and a rerun with the same master seed reproduces
//! every byte.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Purpose tags for the first path word. Keeping them in one place avoids
/// accidental stream collisions between subsystems.
pub mod tag {
    pub const SIMULATE: u64 = 1;
    pub const INJECT: u64 = 2;
    pub const BOOT_OUTER: u64 = 3;
    pub const BOOT_INNER: u64 = 4;
    pub const BOOT_SE: u64 = 5;
    pub const MCMC: u64 = 6;
    pub const ORACLE: u64 = 7;
    pub const STUDY: u64 = 8;
    pub const DEQUANTIZE: u64 = 9;
}

/// Generator for `(master, path)`. Panics if the path has more than 3 words.
pub fn stream_rng(master: u64, path: &[u64]) -> ChaCha12Rng {
    assert!(path.len() <= 3, "stream paths have at most 3 words");
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    for (slot, word) in path.iter().enumerate() {
        seed[8 * (slot + 1)..8 * (slot + 2)].copy_from_slice(&word.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Derive a 64-bit sub-seed, for handing a whole subsystem (which will build
/// its own streams) a seed of its own.
pub fn stream_seed(master: u64, path: &[u64]) -> u64 {
    stream_rng(master, path).next_u64()
}
