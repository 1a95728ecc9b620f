//! Seed fan-out.
//!
//! A master seed is split into named component seeds by hashing
//! `master.to_le_bytes() || label` with SHA-256 and reading the first eight
//! digest bytes little-endian. Per-step substreams mix a base seed with a
//! step index through SplitMix64, so step `t` of a run can be reproduced
//! without replaying steps `0..t`.

use sha2::{Digest, Sha256};

pub const COUPLINGS: &str = "couplings";
pub const SHOTS: &str = "shots";
pub const ESN: &str = "esn";
pub const SYNTHETIC: &str = "synthetic";

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// Lowercase hex SHA-256 of `bytes`, truncated to 16 characters.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}
