//! Identifier, seed and clock sources.
//!
//! Production uses OS randomness and the system clock. Tests and pinned-seed
//! runs swap in a seeded generator and a fixed clock so that whole pipeline
//! runs are byte-reproducible.

use std::sync::Mutex;

use chrono::Utc;
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::domain::Timestamp;

pub enum IdSource {
    Random,
    Seeded(Mutex<ChaCha20Rng>),
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded(Mutex::new(ChaCha20Rng::seed_from_u64(seed)))
    }

    /// 128 random bits as 32 lowercase hex characters.
    pub fn next_hex(&self) -> String {
        let mut bytes = [0u8; 16];
        self.fill(&mut bytes);
        hex::encode(bytes)
    }

    pub fn next_u64(&self) -> u64 {
        let mut bytes = [0u8; 8];
        self.fill(&mut bytes);
        u64::from_le_bytes(bytes)
    }

    fn fill(&self, bytes: &mut [u8]) {
        match self {
            IdSource::Random => OsRng.fill_bytes(bytes),
            IdSource::Seeded(rng) => rng
                .lock()
                .unwrap_or_else(|poisoned| poisoned.into_inner())
                .fill_bytes(bytes),
        }
    }
}

impl Default for IdSource {
    fn default() -> Self {
        IdSource::Random
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_datetime(Utc::now())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub Timestamp);

impl Clock for FixedClock {
    fn now(&self) -> Timestamp {
        self.0
    }
}

/// Seed for the n-th attempt derived from a base seed (splitmix64 finalizer).
/// Attempt 0 uses the base seed unchanged.
pub fn attempt_seed(base: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        return base;
    }
    let mut z = base.wrapping_add(u64::from(attempt).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
