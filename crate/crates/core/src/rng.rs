//! Per-path random streams.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(base_seed, stream)`,
//! so a path's draws never depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bits reserved for the path index inside a stream id.
pub const PATH_BITS: u32 = 40;

pub fn path_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for path `path` of start point `start`.
pub fn stream_id(start: u64, path: u64) -> u64 {
    debug_assert!(path < 1 << PATH_BITS);
    (start << PATH_BITS) | path
}
