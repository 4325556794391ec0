//! Reproducible random streams.
//!
//! Every run gets its own ChaCha8 stream whose key is a SHA-256 digest of
//! `(config hash, algorithm, seed)`. ChaCha is counter-based, so streams
//! with different keys are independent regardless of how runs are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream keyed by the run's identity.
pub fn run_stream(config_hash: &str, algorithm: &str, seed: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(config_hash.as_bytes());
    hasher.update([0u8]);
    hasher.update(algorithm.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Plain seeded stream for tests and examples.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
