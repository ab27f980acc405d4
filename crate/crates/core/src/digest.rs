//! Content digests over canonical JSON.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Canonical JSON bytes: keys sorted, no insignificant whitespace.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json's default map is ordered, so a round-trip through `Value` sorts keys
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("json encoding")
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn digest_of<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(canonical_json(value).as_bytes())
}
