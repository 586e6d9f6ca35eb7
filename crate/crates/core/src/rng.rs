//! Seeded, platform-independent randomness.
//!
//! Every random decision draws from a ChaCha8 stream keyed by the user seed
//! and a purpose string, so adding a new consumer never perturbs existing
//! ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Independent generator for `purpose` under `seed`.
pub fn stream(seed: u64, purpose: &str) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform index in `0..n` drawn through `u64` so the result does not depend
/// on the platform's pointer width.
pub fn index<R: Rng>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}

/// Fisher-Yates shuffle.
pub fn shuffle<T, R: Rng>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}
