//! Seeded, partition-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x1_11CD;

/// Independent generator for work item `stream` of a run seeded by `seed`.
///
/// Every stochastic work item (a detuning point, a delay, a replica) draws
/// from its own stream, so results do not depend on how items are scheduled
/// across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
