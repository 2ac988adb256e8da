//! Named random streams derived from a single master seed.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and
//! positioned on its own 64-bit stream id:
//!
//! ```text
//! stream id = label << 56 | replica << 32 | founder
//! ```
//!
//! with labels `1` (environment), `2` (immigration) and `3` (branching).
//! A shared immigration realization uses replica slot 0; per-replica
//! immigration uses slot `replica + 1`. Each founder (the root or one
//! immigrant) owns the branching stream of its whole subtree, so the
//! root's subtree is the same draw-for-draw whether or not immigrants
//! are present, and a run never depends on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LABEL_ENVIRONMENT: u64 = 1;
const LABEL_IMMIGRATION: u64 = 2;
const LABEL_BRANCHING: u64 = 3;

const MAX_REPLICA: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment,
    /// `None` is the realization shared by all replicas.
    Immigration { replica: Option<u32> },
    Branching { replica: u32, founder: u32 },
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Environment => LABEL_ENVIRONMENT << 56,
            Stream::Immigration { replica } => {
                let slot = replica.map_or(0, |r| {
                    assert!(r < MAX_REPLICA, "replica index out of range");
                    u64::from(r) + 1
                });
                LABEL_IMMIGRATION << 56 | slot << 32
            }
            Stream::Branching { replica, founder } => {
                assert!(replica <= MAX_REPLICA, "replica index out of range");
                LABEL_BRANCHING << 56 | u64::from(replica) << 32 | u64::from(founder)
            }
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}

/// Seed of the `index`-th independent run in a multi-run experiment.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    master_seed.wrapping_add(index)
}
