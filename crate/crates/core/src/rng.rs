//! Seeded random-stream factory.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream. The key
//! is derived from the run seed and a purpose tag with SplitMix64; the
//! ChaCha stream number carries the per-item index (UE, slot, ...). Two
//! different (purpose, index) pairs never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Topology = 1,
    Arrivals = 2,
    Fading = 3,
    Decoding = 4,
    Test = 99,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sweep point `point`, derived from a base seed.
pub fn replication_seed(base: u64, point: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(point.wrapping_add(0x5EED))) ^ rep)
}

#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> SimRng {
        let key = splitmix64(self.seed ^ splitmix64(purpose as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }
}
