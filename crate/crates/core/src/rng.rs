//! Seeded, splittable random streams.
//!
//! Monte Carlo work is cut into fixed-size blocks and block `i` always draws
//! from stream `i` of the seed. The partition into blocks does not depend on
//! the thread count, so results are bit-identical however rayon schedules it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of draws handled by one stream.
pub const BLOCK: usize = 1 << 14;

/// splitmix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed, e.g. one per grid point.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index))
}

/// Generator for block `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    rng.set_stream(stream);
    rng
}

/// `(stream index, draws in block)` for `m` draws.
pub fn blocks(m: usize) -> impl Iterator<Item = (u64, usize)> + Clone {
    (0..m.div_ceil(BLOCK)).map(move |i| (i as u64, BLOCK.min(m - i * BLOCK)))
}
