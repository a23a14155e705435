//! Reproducible per-path random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream, keyed by the
//! master seed and a 64-bit stream id. ChaCha exposes 2^64 independent
//! streams per key, so distinct ids never overlap regardless of how many
//! numbers a path consumes. The stream id packs a domain tag into the top
//! byte so that unrelated experiments sharing a seed stay independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper bound (exclusive) on path indices within one stream domain.
pub const MAX_PATHS: u64 = 1 << 56;

/// Stream domains. The tag occupies the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamDomain {
    Diffusion = 1,
    DiffusionPlus = 2,
    Escape = 3,
    Chain = 4,
    ChainPlus = 5,
}

pub fn stream_id(domain: StreamDomain, path_index: u64) -> u64 {
    assert!(path_index < MAX_PATHS, "path index {path_index} out of range");
    ((domain as u64) << 56) | path_index
}

pub fn path_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
