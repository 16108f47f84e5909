//! Seeded randomness. Every random draw in the crate goes through an explicit
//! [`SeededRng`]; child seeds are derived by hashing so that results never
//! depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of coordinates into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Stream tags used when an [`Instance`](crate::Instance) is materialised from its seed.
pub mod stream {
    pub const SOURCES: u64 = 0x5352_4353;
    pub const SUBSPACE: u64 = 0x5355_4253;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const SOLVER: u64 = 0x534f_4c56;
}
