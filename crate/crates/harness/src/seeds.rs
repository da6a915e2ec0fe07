//! Deterministic random streams: SHA-256 over the master seed and a label
//! path keys a ChaCha8 generator, so every `(master_seed, labels)` pair names
//! one reproducible stream regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 256-bit key for `(master_seed, labels)`. Labels are length-prefixed so
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn seed_key(master_seed: u64, labels: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"cso-seed-v1");
    h.update(master_seed.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    h.finalize().into()
}

pub fn seed_stream(master_seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(seed_key(master_seed, labels))
}

/// Short fingerprint of a key, written to the CSV `seed` column.
pub fn seed_tag(key: &[u8; 32]) -> u64 {
    u64::from_le_bytes(key[..8].try_into().expect("key has 32 bytes"))
}
