//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in this crate takes an explicit stream derived
//! from a 64-bit master seed. Stream `i` of seed `s` is a ChaCha8 generator
//! keyed by SplitMix64 applied to `s` and `i`, so batches of independent
//! samples can be assigned one stream per sample index and the results do
//! not depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed from which per-task streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeder {
    master: u64,
}

impl Seeder {
    pub fn new(master: u64) -> Self {
        Seeder { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derive a 64-bit child seed for stream `index`.
    pub fn child_seed(&self, index: u64) -> u64 {
        splitmix64(self.master ^ splitmix64(index))
    }

    /// The ChaCha8 stream for `index`. The full 32-byte key is expanded from
    /// the child seed with SplitMix64.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut s = self.child_seed(index);
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// A sub-seeder for a named phase, so that different phases of one run
    /// never share streams.
    pub fn scoped(&self, scope: u64) -> Seeder {
        Seeder {
            master: splitmix64(self.master.wrapping_add(scope.rotate_left(17))),
        }
    }
}
