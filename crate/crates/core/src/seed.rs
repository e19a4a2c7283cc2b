//! Stable seed derivation.

use sha2::{Digest, Sha256};

/// Derives a child seed from `(root, stage, index)`.
///
/// The mapping is a SHA-256 of the little-endian root, the UTF-8 stage label and the
/// little-endian index, truncated to 64 bits. It does not depend on the platform or
/// on the Rust version, so files produced from a seed are reproducible everywhere.
pub fn derive(root: u64, stage: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}
