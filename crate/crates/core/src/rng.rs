//! Seeded, splittable random streams.
//!
//! Every consumer derives its generator from a single scenario seed plus a
//! stream id, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    FaceSampling,
    MonteCarlo,
    Dynamics,
}

impl Substream {
    /// Stream offsets are spaced far apart so per-item sub-ids never collide.
    pub fn base(self) -> u64 {
        match self {
            Substream::FaceSampling => 0,
            Substream::MonteCarlo => 1 << 40,
            Substream::Dynamics => 2 << 40,
        }
    }
}

/// ChaCha8 generator keyed by `seed`, positioned on stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
