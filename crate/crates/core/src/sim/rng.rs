//! Per-node random streams.
//!
//! Every stream is ChaCha8 keyed by the master seed; the stream id selects
//! an independent keystream. Node `i` owns stream `2i + 1` for traffic and
//! `2i + 2` for MAC and sensing draws, so adding nodes never shifts the
//! draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

pub fn traffic_stream(seed: u64, node: usize) -> ChaCha8Rng {
    stream(seed, 2 * node as u64 + 1)
}

pub fn mac_stream(seed: u64, node: usize) -> ChaCha8Rng {
    stream(seed, 2 * node as u64 + 2)
}
