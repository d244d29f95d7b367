//! Deterministic byte-level JSON encoding (RFC 8785 / JCS) and the
//! pre-authentication encoding that binds a payload type to payload bytes.
//!
//! Signatures are computed over these bytes, so the rules here are frozen:
//! object keys sorted by UTF-16 code units, minimal string escaping, no
//! insignificant whitespace, ECMAScript number rendering.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{DeserializeSeed, Error as _, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};
use thiserror::Error;

/// Canonical JSON bytes. Re-parsing and re-canonicalizing yields the same
/// bytes (fixed point), which makes them safe to sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalBytes(Vec<u8>);

impl CanonicalBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for CanonicalBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for CanonicalBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

#[derive(Debug, Error)]
pub enum CanonError {
    /// The same member name appears twice in one object.
    #[error("duplicate object member \"{member}\"")]
    DuplicateKey { member: String },
    /// Input text is not valid JSON (malformed syntax, lone surrogates, ...).
    #[error("not canonicalizable JSON text: {0}")]
    InvalidJson(String),
}

/// Serialize a JSON value to canonical bytes.
pub fn canonicalize(value: &Value) -> CanonicalBytes {
    let mut out = Vec::with_capacity(128);
    write_value(&mut out, value);
    CanonicalBytes(out)
}

/// Parse JSON text and canonicalize it, rejecting duplicate object members.
pub fn canonicalize_text(text: &[u8]) -> Result<CanonicalBytes, CanonError> {
    let mut de = serde_json::Deserializer::from_slice(text);
    let value = NoDupValue
        .deserialize(&mut de)
        .map_err(classify_parse_error)?;
    de.end()
        .map_err(|e| CanonError::InvalidJson(e.to_string()))?;
    Ok(canonicalize(&value))
}

/// Length-prefixed binding of payload type and payload, signed instead of
/// the raw payload bytes: `DSSEv1 SP len(type) SP type SP len(payload) SP payload`.
pub fn pre_auth_encode(payload_type: &str, payload: impl AsRef<[u8]>) -> Vec<u8> {
    let payload = payload.as_ref();
    let mut out = Vec::with_capacity(payload.len() + payload_type.len() + 24);
    out.extend_from_slice(b"DSSEv1 ");
    out.extend_from_slice(payload_type.len().to_string().as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload_type.as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload.len().to_string().as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload);
    out
}

fn write_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(out, item);
            }
            out.push(b']');
        }
        Value::Object(map) => write_object(out, map),
    }
}

fn write_object(out: &mut Vec<u8>, map: &Map<String, Value>) {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort_by(|a, b| utf16_cmp(a, b));
    out.push(b'{');
    for (i, key) in keys.iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        write_string(out, key);
        out.push(b':');
        write_value(out, &map[key.as_str()]);
    }
    out.push(b'}');
}

/// Member names sort by their UTF-16 code units, not by code point; the two
/// orders disagree for supplementary-plane characters against U+E000..U+FFFF.
fn utf16_cmp(a: &str, b: &str) -> Ordering {
    a.encode_utf16().cmp(b.encode_utf16())
}

fn write_string(out: &mut Vec<u8>, s: &str) {
    out.push(b'"');
    for ch in s.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\u{0c}' => out.extend_from_slice(b"\\f"),
            '\r' => out.extend_from_slice(b"\\r"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

fn write_number(out: &mut Vec<u8>, n: &serde_json::Number) {
    if let Some(u) = n.as_u64() {
        out.extend_from_slice(u.to_string().as_bytes());
    } else if let Some(i) = n.as_i64() {
        out.extend_from_slice(i.to_string().as_bytes());
    } else {
        // serde_json numbers are always finite
        let f = n.as_f64().expect("finite JSON number");
        if f == 0.0 {
            // covers negative zero, which renders as plain "0"
            out.push(b'0');
        } else {
            let mut buf = ryu_js::Buffer::new();
            out.extend_from_slice(buf.format_finite(f).as_bytes());
        }
    }
}

fn classify_parse_error(err: serde_json::Error) -> CanonError {
    let msg = err.to_string();
    if let Some(rest) = msg.strip_prefix("duplicate object member \"") {
        if let Some(member) = rest.split('"').next() {
            return CanonError::DuplicateKey {
                member: member.to_string(),
            };
        }
    }
    CanonError::InvalidJson(msg)
}

/// Deserializes into `Value` like serde_json does, but rejects objects with
/// repeated member names instead of silently keeping the last one.
struct NoDupValue;

impl<'de> DeserializeSeed<'de> for NoDupValue {
    type Value = Value;

    fn deserialize<D>(self, deserializer: D) -> Result<Value, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        deserializer.deserialize_any(NoDupVisitor)
    }
}

struct NoDupVisitor;

impl<'de> Visitor<'de> for NoDupVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_string()))
    }

    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A>(self, mut seq: A) -> Result<Value, A::Error>
    where
        A: SeqAccess<'de>,
    {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element_seed(NoDupValue)? {
            items.push(item);
        }
        Ok(Value::Array(items))
    }

    fn visit_map<A>(self, mut access: A) -> Result<Value, A::Error>
    where
        A: MapAccess<'de>,
    {
        let mut map = Map::new();
        while let Some(key) = access.next_key::<String>()? {
            let value = access.next_value_seed(NoDupValue)?;
            if map.insert(key.clone(), value).is_some() {
                return Err(A::Error::custom(format!(
                    "duplicate object member \"{key}\""
                )));
            }
        }
        Ok(Value::Object(map))
    }
}
