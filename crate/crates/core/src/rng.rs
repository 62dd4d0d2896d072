//! Independent, seed-derived random streams. Each consumer draws from its own
//! stream so that adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    NetworkInit = 1,
    Exploration = 2,
    Replay = 3,
    Environment = 4,
    Trainer = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
