//! Canonical JSON bytes and content hashes.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Recursively sorts object keys. `serde_json::Map` is already ordered unless
/// `preserve_order` is enabled somewhere in the build, so do it explicitly.
fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Pretty-printed JSON with sorted keys and a trailing newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    let v = sorted(serde_json::to_value(value).expect("value serializes to JSON"));
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values always print");
    s.push('\n');
    s
}

/// Single-line canonical form, used for log records.
pub fn to_canonical_line<T: Serialize + ?Sized>(value: &T) -> String {
    let v = sorted(serde_json::to_value(value).expect("value serializes to JSON"));
    serde_json::to_string(&v).expect("JSON values always print")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical form.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(to_canonical_string(value).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_at_every_level() {
        let s = to_canonical_line(&json!({"b": 1, "a": {"d": [{"z": 0, "y": 1}], "c": null}}));
        assert_eq!(s, r#"{"a":{"c":null,"d":[{"y":1,"z":0}]},"b":1}"#);
        assert!(to_canonical_string(&json!({})).ends_with('\n'));
    }

    #[test]
    fn hash_ignores_input_key_order() {
        let a = json!({"x": 1, "y": [1, 2]});
        let b: Value = serde_json::from_str(r#"{"y": [1, 2], "x": 1}"#).unwrap();
        assert_eq!(content_hash(&a), content_hash(&b));
        assert_eq!(sha256_hex(b"").len(), 64);
    }
}
