//! Purpose-scoped random streams derived from the run seed.
//!
//! Each draw site gets its own generator keyed by `(seed, purpose, index)`,
//! so a resumed run reproduces the exact draws of an uninterrupted one
//! without persisting generator state.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derived(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// `n` distinct indices below `len`, uniformly without replacement, in draw
/// order. Panics if `n > len`; callers check first.
pub fn sample_indices(rng: &mut ChaCha8Rng, len: usize, n: usize) -> Vec<usize> {
    assert!(n <= len, "cannot draw {n} of {len}");
    let mut idx: Vec<usize> = (0..len).collect();
    let (picked, _) = idx.partial_shuffle(rng, n);
    picked.to_vec()
}
