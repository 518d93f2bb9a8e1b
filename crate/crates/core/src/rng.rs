//! Seeded, splittable random streams.
//!
//! A stream is identified by a `(seed, index)` pair. The same pair always
//! produces the same sequence; distinct pairs select disjoint ChaCha20
//! keystreams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    index: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// A child stream keyed by this stream's seed and a derived index.
    pub fn derive(&self, salt: u64) -> Self {
        Self::new(self.seed, mix64(self.index ^ mix64(salt)))
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream index for replication `rep` at sample size `n`. Depends only on the
/// pair, so extending an n grid leaves existing replications untouched.
pub fn replication_index(n: usize, rep: usize) -> u64 {
    mix64(mix64(n as u64) ^ (rep as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
