//! Counter-style keyed random streams.
//!
//! Every random decision in the library draws from a stream identified by a
//! [`RngKey`], which is derived from a master seed and a chain of context
//! tags (tree index, node path, attempt, instance pair, ...). No generator is
//! shared between contexts, so results do not depend on scheduling order or
//! worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used for stable hashing of labels and descriptors.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngKey {
    pub fn new(master_seed: u64) -> Self {
        RngKey(splitmix64(master_seed))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Child stream for a numeric context tag.
    pub fn derive(self, tag: u64) -> Self {
        RngKey(splitmix64(self.0 ^ splitmix64(tag ^ 0xA076_1D64_78BD_642F)))
    }

    /// Child stream for a named context.
    pub fn derive_str(self, label: &str) -> Self {
        self.derive(fnv1a(label.as_bytes()))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}
