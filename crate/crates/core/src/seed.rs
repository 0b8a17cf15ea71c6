//! Stable hashing and seed derivation.
//!
//! Every random stream in a run is derived from the root seed plus a label, so
//! a resumed run draws exactly the numbers an uninterrupted one would.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 64-bit digest of a sequence of byte strings. Parts are length-prefixed so
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    stable_hash(&[&root.to_le_bytes(), label.as_bytes(), &index.to_le_bytes()])
}

pub fn rng_for(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}

/// Maps a hash onto `[0, 1)` using its top 53 bits.
pub fn unit_interval(hash: u64) -> f64 {
    (hash >> 11) as f64 / (1u64 << 53) as f64
}
