//! Counter-based random sub-streams.
//!
//! Every random event in a run draws from a stream addressed by a small tuple
//! of tags (generation, phase, index, ...). A stream depends only on the
//! master seed and its tags, so work can be scattered across threads in any
//! order and still reproduce the serial result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Tags for the phases of a generation.
pub mod phase {
    pub const INIT: u64 = 1;
    pub const MUT_WEIGHTS: u64 = 2;
    pub const MUT_ADD: u64 = 3;
    pub const MUT_DELETE: u64 = 4;
    pub const MUT_DELAYS: u64 = 5;
    pub const PAIRING: u64 = 6;
    pub const CROSSOVER: u64 = 7;
    pub const SELECTION: u64 = 8;
    pub const REGROW: u64 = 9;
    pub const TRAIN: u64 = 10;
    pub const RETRAIN: u64 = 11;
    pub const STRUCTURE: u64 = 12;
    pub const CALL: u64 = 13;
    pub const GRID: u64 = 14;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seed from which tagged sub-streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    /// Derive a child seed from tags; children of children stay independent.
    pub fn child(&self, tags: &[u64]) -> SeedStream {
        let mut h = splitmix64(self.0);
        for &t in tags {
            h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        SeedStream(h)
    }

    pub fn rng(&self, tags: &[u64]) -> Rng {
        Rng::seed_from_u64(self.child(tags).0)
    }
}
