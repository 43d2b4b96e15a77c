//! Seeded randomness.
//!
//! Every stochastic component draws from xoshiro256++ seeded through
//! SplitMix64 (`SeedableRng::seed_from_u64`), so a single `u64` reproduces a
//! whole run.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeedRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeedRng {
    SeedRng::seed_from_u64(seed)
}

/// Derives an independent stream seed for a named sub-component.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
