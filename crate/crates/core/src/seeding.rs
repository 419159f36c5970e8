//! Deterministic derivation of independent rng streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for the environment's own draws.
pub const ENV_STREAM: u64 = 0;
pub const P1_STREAM: u64 = 1;
pub const P2_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `(master, stream, index)` into a single 64-bit seed.
pub fn stream_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream, index))
}
