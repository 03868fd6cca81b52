//! Deterministic seed derivation.
//!
//! Every random draw in the crate flows from one master seed through a
//! labelled derivation, so independent concerns (backbone init, adapter
//! init, splits, shuffles, noise) get decoupled streams that never shift
//! when an unrelated consumer adds or removes draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a sub-seed from `master` and a purpose label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// A reproducible RNG for the given master seed and purpose label.
pub fn rng_for(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_inputs_same_stream() {
        let a: Vec<u64> = (0..4).map(|_| 0u64).collect();
        let mut r1 = rng_for(7, "unit");
        let mut r2 = rng_for(7, "unit");
        let s1: Vec<u64> = a.iter().map(|_| r1.random()).collect();
        let s2: Vec<u64> = a.iter().map(|_| r2.random()).collect();
        assert_eq!(s1, s2);
    }

    #[test]
    fn labels_decouple_streams() {
        assert_ne!(derive_seed(7, "alpha"), derive_seed(7, "beta"));
        assert_ne!(derive_seed(7, "alpha"), derive_seed(8, "alpha"));
    }
}
