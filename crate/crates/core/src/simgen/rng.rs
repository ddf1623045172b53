//! Seeded random streams. Every stochastic piece of an experiment draws from
//! its own ChaCha8 stream, addressed by the master seed plus a path of
//! labels, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels for the independent parts of a replication.
pub mod label {
    pub const COVARIATES: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const METHOD: u64 = 3;
    pub const NEW_ROWS: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const REPLICATION: u64 = 6;
    pub const GRID: u64 = 7;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A position in the tree of streams below a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Key of the child stream `label`.
    pub fn child(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            path: splitmix(self.path ^ splitmix(label)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }
}
