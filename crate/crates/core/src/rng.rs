//! Seed derivation for independent random streams.
//!
//! One master seed feeds every experiment. Each purpose (scenario drops,
//! fading, label noise, shuffling, ...) gets its own stream derived from the
//! master seed, a fixed label and an index, so turning one knob never shifts
//! the randomness consumed elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub mod label {
    pub const SCENARIO: &str = "scenario";
    pub const LOS: &str = "los";
    pub const FADING: &str = "fading";
    pub const MASKING: &str = "masking";
    pub const LABEL_NOISE: &str = "label-noise";
    pub const SHUFFLE: &str = "shuffle";
    pub const SPLIT: &str = "split";
    pub const INIT: &str = "init";
    pub const DROPOUT: &str = "dropout";
    pub const BATCHING: &str = "batching";
}

pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(master: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, label, index))
}
