//! Deterministic randomness.
//!
//! Every random choice in a run (verifier queries, challenges, prover tapes,
//! timing jitter) is drawn from a [`SeededRng`]. Independent streams are
//! derived from one master seed with a label and an index, so a round can be
//! replayed or computed on any thread without consuming a shared generator.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// A ChaCha20 stream keyed from a 64-bit seed.
#[derive(Debug)]
pub struct SeededRng(ChaCha20Rng);

impl SeededRng {
    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, "root", 0)
    }

    /// Stream `(label, index)` under `seed`. Distinct labels or indices give
    /// unrelated streams.
    pub fn derive(seed: u64, label: &str, index: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"relzkp/rng/v1");
        hasher.update(seed.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update(index.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        SeededRng(ChaCha20Rng::from_seed(key))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
