//! Seeded RNG construction and child-seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG used throughout the crate.
pub type TokRng = ChaCha8Rng;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_2024;

pub fn rng_from_seed(seed: u64) -> TokRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices (e.g. line, word) into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

pub fn derive_rng(master: u64, path: &[u64]) -> TokRng {
    rng_from_seed(derive_seed(master, path))
}
