//! Seeded random streams.
//!
//! Every resampling routine draws from ChaCha8 seeded with the caller's
//! `seed`. A single test invocation uses stream 0. Replication studies give
//! replicate `r` the stream `r + 1`, so replicates are independent of each
//! other and of the scheduling order when run in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StatRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StatRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for a single test invocation.
pub fn invocation(seed: u64) -> StatRng {
    stream(seed, 0)
}

/// Stream for replicate `index` of a replication study.
pub fn replicate(seed: u64, index: u64) -> StatRng {
    stream(seed, index + 1)
}
