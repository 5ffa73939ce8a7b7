//! Named random substreams derived from one run seed.
//!
//! Each consumer (a model fit, a synthetic destination) hashes its own name
//! together with the seed, so adding or removing a consumer never shifts the
//! draws seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn substream_seed(seed: u64, name: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.finalize().into()
}

pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(substream_seed(seed, name))
}

/// A 64-bit seed for APIs that take one.
pub fn substream_u64(seed: u64, name: &str) -> u64 {
    let bytes = substream_seed(seed, name);
    u64::from_le_bytes(bytes[..8].try_into().expect("32-byte digest"))
}
