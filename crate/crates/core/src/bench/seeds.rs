use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Seed of one random stream: the first 8 bytes (little endian) of
/// `SHA-256("{base}/{replicate}/{role}")`.
///
/// Streams of different replicates or roles are unrelated, and adding
/// variants or noise levels to a campaign never shifts existing streams.
pub fn derive_seed(base: u64, replicate: usize, role: &str) -> u64 {
    let digest = Sha256::digest(format!("{base}/{replicate}/{role}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Canonical JSON: object keys sorted, no whitespace.
pub fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", body.join(","))
        }
        scalar => scalar.to_string(),
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let digest = Sha256::digest(canonical_json(&v).as_bytes());
    Ok(hex::encode(&digest[..8]))
}
