//! Domain types for attribute assertion metadata: digest sets, resource
//! descriptors, assertions, reports, and the validation machinery that
//! decodes them from JSON.
//!
//! All types are immutable after construction and safe to share across
//! threads. Decoding collects every violation instead of failing fast; see
//! [`decode_report`] and [`decode_assertion`].

mod decode;

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

pub use decode::{
    decode_assertion, decode_descriptor, decode_report, validate_report, DecodeError, Decoded,
};

/// Digest algorithms this toolkit can compute and validate, with the hex
/// length of their rendered digests. Anything else is "unregistered":
/// carried opaquely in lax mode, rejected in strict mode.
pub const REGISTERED_ALGORITHMS: &[(&str, usize)] = &[("sha256", 64), ("sha512", 128)];

/// Returns the expected hex length for a registered algorithm.
pub fn registered_hex_len(algorithm: &str) -> Option<usize> {
    REGISTERED_ALGORITHMS
        .iter()
        .find(|(name, _)| *name == algorithm)
        .map(|(_, len)| *len)
}

/// A set of cryptographic digests keyed by algorithm name. The identity of
/// every object: two sets match only on overlapping algorithms with equal
/// values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DigestSet {
    pub entries: BTreeMap<String, String>,
}

/// Outcome of comparing two digest sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DigestMatch {
    /// At least one shared algorithm, and every shared algorithm agrees.
    Match,
    /// No algorithm in common; consumers treat this as not matching.
    NoOverlap,
    /// A shared algorithm has differing values. Dominates everything else.
    Mismatch,
}

impl DigestSet {
    pub fn sha256(hex_value: impl Into<String>) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("sha256".to_string(), hex_value.into());
        DigestSet { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, algorithm: &str) -> Option<&str> {
        self.entries.get(algorithm).map(String::as_str)
    }

    /// Compare against another digest set over the shared algorithms.
    pub fn compare(&self, other: &DigestSet) -> DigestMatch {
        let mut shared = false;
        for (algorithm, value) in &self.entries {
            if let Some(other_value) = other.entries.get(algorithm) {
                if other_value != value {
                    return DigestMatch::Mismatch;
                }
                shared = true;
            }
        }
        if shared {
            DigestMatch::Match
        } else {
            DigestMatch::NoOverlap
        }
    }
}

impl fmt::Display for DigestSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (algorithm, value) in &self.entries {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{algorithm}:{value}")?;
            first = false;
        }
        Ok(())
    }
}

/// Reference to any object (artifact or metadata): name, URI, digest set,
/// download location, media type, and optionally the content itself.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ResourceDescriptor {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<DigestSet>,
    #[serde(rename = "downloadLocation", skip_serializing_if = "Option::is_none")]
    pub download_location: Option<String>,
    #[serde(rename = "mediaType", skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "serialize_content"
    )]
    pub content: Option<Vec<u8>>,
}

fn serialize_content<S: Serializer>(
    content: &Option<Vec<u8>>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine as _;
    match content {
        Some(bytes) => serializer.serialize_str(&STANDARD.encode(bytes)),
        None => serializer.serialize_none(),
    }
}

impl ResourceDescriptor {
    /// A descriptor identifying bytes by their sha256 digest.
    pub fn from_digest(digest: DigestSet) -> Self {
        ResourceDescriptor {
            digest: Some(digest),
            ..Default::default()
        }
    }
}

/// Shape-only deserialization for configuration files. Documents from
/// untrusted sources go through [`decode_descriptor`] instead, which
/// validates and collects issues.
impl<'de> Deserialize<'de> for ResourceDescriptor {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        use base64::engine::general_purpose::STANDARD;
        use base64::Engine as _;

        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            name: Option<String>,
            #[serde(default)]
            uri: Option<String>,
            #[serde(default)]
            digest: Option<DigestSet>,
            #[serde(default, rename = "downloadLocation")]
            download_location: Option<String>,
            #[serde(default, rename = "mediaType")]
            media_type: Option<String>,
            #[serde(default)]
            content: Option<String>,
        }

        let raw = Raw::deserialize(deserializer)?;
        let content = raw
            .content
            .map(|encoded| STANDARD.decode(encoded.as_bytes()))
            .transpose()
            .map_err(|_| serde::de::Error::custom("content must be base64 text"))?;
        Ok(ResourceDescriptor {
            name: raw.name,
            uri: raw.uri,
            digest: raw.digest,
            download_location: raw.download_location,
            media_type: raw.media_type,
            content,
        })
    }
}

/// The deprecated reference format, superseded by [`ResourceDescriptor`].
/// Kept so existing metadata can be upgraded in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacyObjectReference {
    pub object_type: Option<String>,
    pub name: String,
    pub digest: DigestSet,
    pub location_uri: Option<String>,
}

/// Field mapping for the upgrade: objectType becomes mediaType, locationURI
/// becomes uri; name and digest carry over. Nothing else is synthesized.
impl From<LegacyObjectReference> for ResourceDescriptor {
    fn from(legacy: LegacyObjectReference) -> Self {
        ResourceDescriptor {
            name: Some(legacy.name),
            uri: legacy.location_uri,
            digest: Some(legacy.digest),
            download_location: None,
            media_type: legacy.object_type,
            content: None,
        }
    }
}

/// Producer configuration or state under which a claimed attribute holds.
/// The body is free-form; a reserved "type" member self-describes the format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Conditions {
    pub body: serde_json::Map<String, Value>,
}

impl Conditions {
    pub fn new(body: serde_json::Map<String, Value>) -> Self {
        Conditions { body }
    }

    /// The self-describing discriminator, read from the reserved "type" member.
    pub fn type_discriminator(&self) -> Option<&str> {
        self.body.get("type").and_then(Value::as_str)
    }
}

impl Serialize for Conditions {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.body.len()))?;
        for (key, value) in &self.body {
            map.serialize_entry(key, value)?;
        }
        map.end()
    }
}

/// A claim that an artifact or producer has a functional attribute, with
/// optional conditions, target object, and corroborating evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeAssertion {
    pub attribute: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Conditions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<ResourceDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<ResourceDescriptor>,
}

impl AttributeAssertion {
    pub fn new(attribute: impl Into<String>) -> Self {
        AttributeAssertion {
            attribute: attribute.into(),
            conditions: None,
            target: None,
            evidence: None,
        }
    }
}

/// The signable unit of metadata: a subject artifact, one or more attribute
/// assertions about it, and optionally the producer that created it.
///
/// One subject per report. Statement formats elsewhere allow a subject
/// list; here a report about several artifacts is several reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub subject: ResourceDescriptor,
    pub attributes: Vec<AttributeAssertion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub producer: Option<ResourceDescriptor>,
}

impl Report {
    /// JSON value with the exact field layout that gets canonicalized and signed.
    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("report serialization is infallible")
    }
}

/// Validation mode. Lax accepts the published example corpus (warnings where
/// the normative text is stricter); strict enforces the normative text and is
/// the default for signing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Strict,
    #[default]
    Lax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// The closed set of machine-readable validation codes. Rendered in
/// SCREAMING_SNAKE_CASE in issue listings and JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    /// A member name not defined by the format.
    UnknownKey,
    /// A member holds a JSON value of the wrong type.
    WrongType,
    /// A required member is absent.
    MissingField,
    /// A report's attribute list is empty; one or more assertions required.
    EmptyAttributes,
    /// A report subject carries no digest.
    SubjectDigestRequired,
    /// An assertion's attribute member is absent or blank.
    MissingAttribute,
    /// A digest set with no entries.
    EmptyDigestSet,
    /// A digest algorithm name that is not a lowercase ASCII token.
    InvalidAlgorithmId,
    /// A digest algorithm outside the registry.
    UnregisteredAlgorithm,
    /// A digest value that is not lowercase hex.
    InvalidDigestHex,
    /// A digest value with the wrong length for its algorithm.
    BadDigestLength,
    /// A uri or downloadLocation member that does not parse as a URI.
    InvalidUri,
    /// A descriptor with none of name, uri, or digest.
    DescriptorIncomplete,
    /// A conditions member whose top level is not an object.
    ConditionsNotMap,
    /// A conditions object without the self-describing "type" member.
    ConditionsTypeMissing,
    /// Assertion evidence without a digest; its integrity is unverifiable.
    EvidenceDigestMissing,
    /// A legacy object reference was upgraded in place.
    LegacyUpgraded,
    /// A legacy member conflicts with its modern counterpart; the modern
    /// value wins.
    LegacyKeyConflict,
    /// Base64 content that does not decode.
    InvalidContent,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self).expect("issue codes serialize");
        f.write_str(text.as_str().unwrap_or("UNKNOWN"))
    }
}

/// One validation finding, addressed by a slash-separated field path with
/// zero-based list indices (e.g. `/attributes/1/evidence`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub path: String,
    pub code: IssueCode,
    pub message: String,
}

impl ValidationIssue {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} at {}: {}", self.code, self.path, self.message)
    }
}
