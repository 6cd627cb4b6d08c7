//! Seeded random streams. Every consumer derives its stream from a
//! `(seed, stream id)` pair so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

// Stream ids for the non-tree consumers; trees use their index.
pub(crate) const MCAR_STREAM: u64 = u64::MAX - 1;
pub(crate) const SPLIT_STREAM: u64 = u64::MAX - 2;
pub(crate) const SYNTH_STREAM: u64 = u64::MAX - 3;
