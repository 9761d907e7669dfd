//! Random streams.
//!
//! Every random quantity comes from ChaCha8 seeded with a 64-bit seed and
//! a 64-bit stream number. Simulation replication `r` of a scenario with
//! seed `s` uses stream `r`; bootstrap replicate `b` uses stream `b` of the
//! bootstrap seed. Results therefore do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
