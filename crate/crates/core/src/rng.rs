//! Seed plumbing. Every stochastic stage draws from a ChaCha stream whose seed
//! is derived from the global seed plus a stage label, so stages can be re-run
//! independently and still reproduce the same numbers.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

/// Derives a stage seed from `seed` and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

pub fn rng_from_seed(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(seed: u64, label: &str) -> StageRng {
    rng_from_seed(derive_seed(seed, label))
}

/// Stable 64-bit hash of a string (first 8 bytes of SHA-256).
pub fn string_hash(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Fills `out` with draws from `U[-half_width, half_width)`.
pub fn fill_uniform(rng: &mut StageRng, half_width: f64, out: &mut [f64]) {
    if half_width == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let dist = Uniform::new(-half_width, half_width);
    for v in out {
        *v = dist.sample(rng);
    }
}
