//! Deterministic seeding of independent random streams.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids reserved for internal uses; replication streams use small integers.
pub const STREAM_FOLDS: u64 = 0xF01D_0000_0000_0000;
pub const STREAM_COVARIATES: u64 = 0xC0FA_0000_0000_0000;
pub const STREAM_TRUTH: u64 = 0x7207_0000_0000_0000;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(master, stream)`.
///
/// For a fixed master the map is a bijection of `stream`, so distinct streams never collide.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix(master ^ mix(stream.wrapping_add(GOLDEN)))
}

/// Random generator for the given stream.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
