//! Deterministic random-number streams for reproducible parallel sampling.
//!
//! Every Monte Carlo sample draws from a stream identified by
//! `(master_seed, sample_index)`. Streams are mutually independent ChaCha
//! streams, so results do not depend on how samples are scheduled across
//! threads, and a single sample can be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for one Monte Carlo sample.
pub fn sample_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for a named sub-experiment.
///
/// SplitMix64 output; the same (seed, role) pair always maps to the same
/// derived seed.
pub fn derive_seed(master_seed: u64, role: u64) -> u64 {
    let mut z = master_seed ^ role.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit name hash (FNV-1a) for deriving per-identity seed roles.
/// Independent of the standard library hasher, which is not stable across
/// releases.
pub fn role_id(name: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
