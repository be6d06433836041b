//! Deterministic random streams.
//!
//! Every Monte Carlo loop in the crate draws replicate `i` from its own
//! generator, seeded from `(master seed, tag, i)`. Results therefore do not
//! depend on how replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng64 = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A family of independent random streams indexed by replicate number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    key: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            key: splitmix64(seed),
        }
    }

    /// Streams for a named sub-experiment. Distinct tags give unrelated
    /// families even under the same master seed.
    pub fn sub(&self, tag: &str) -> Self {
        Streams {
            key: splitmix64(self.key ^ fnv1a(tag)),
        }
    }

    /// Seed of replicate `index`.
    pub fn seed(&self, index: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(index.wrapping_add(1)))
    }

    pub fn rng(&self, index: u64) -> Rng64 {
        Rng64::seed_from_u64(self.seed(index))
    }
}
