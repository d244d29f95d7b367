//! Validating JSON decoder for reports, assertions, and descriptors.
//!
//! Unlike a derive-based deserializer this walker never fails fast: it
//! collects every violation with a slash-separated field path, so a document
//! with N distinct problems yields at least N issues.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{
    registered_hex_len, AttributeAssertion, Conditions, DecodeMode, DigestSet, IssueCode,
    LegacyObjectReference, Report, ResourceDescriptor, Severity, ValidationIssue,
};

/// Successful decode plus any warning-severity findings.
#[derive(Debug, Clone)]
pub struct Decoded<T> {
    pub value: T,
    pub warnings: Vec<ValidationIssue>,
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    /// The document parsed but violates the format. Carries the full issue
    /// list, warnings included; at least one entry is error severity.
    #[error("invalid document: {}", summarize_issues(.0))]
    Invalid(Vec<ValidationIssue>),
}

fn summarize_issues(issues: &[ValidationIssue]) -> String {
    let errors: Vec<String> = issues
        .iter()
        .filter(|i| i.is_error())
        .map(ToString::to_string)
        .collect();
    format!("{} issue(s): {}", issues.len(), errors.join("; "))
}

/// Decode a report document. Returns the report with warnings, or the full
/// list of issues when any has error severity.
pub fn decode_report(document: &[u8], mode: DecodeMode) -> Result<Decoded<Report>, DecodeError> {
    let value: Value =
        serde_json::from_slice(document).map_err(|e| DecodeError::MalformedJson(e.to_string()))?;
    let mut cx = Context::new(mode);
    let report = decode_report_value(&mut cx, &value);
    cx.finish(report)
}

/// Decode a single attribute assertion document.
pub fn decode_assertion(
    document: &[u8],
    mode: DecodeMode,
) -> Result<Decoded<AttributeAssertion>, DecodeError> {
    let value: Value =
        serde_json::from_slice(document).map_err(|e| DecodeError::MalformedJson(e.to_string()))?;
    let mut cx = Context::new(mode);
    let assertion = decode_assertion_value(&mut cx, &value);
    cx.finish(assertion)
}

/// Decode a standalone resource descriptor document.
pub fn decode_descriptor(
    document: &[u8],
    mode: DecodeMode,
) -> Result<Decoded<ResourceDescriptor>, DecodeError> {
    let value: Value =
        serde_json::from_slice(document).map_err(|e| DecodeError::MalformedJson(e.to_string()))?;
    let mut cx = Context::new(mode);
    let descriptor = decode_descriptor_value(&mut cx, &value);
    cx.finish(descriptor)
}

/// Re-validate an in-memory report by round-tripping it through its JSON
/// form. Returns all issues found (empty when the report is valid).
pub fn validate_report(report: &Report, mode: DecodeMode) -> Vec<ValidationIssue> {
    let value = report.to_json_value();
    let mut cx = Context::new(mode);
    decode_report_value(&mut cx, &value);
    cx.issues
}

struct Context {
    mode: DecodeMode,
    path: Vec<String>,
    issues: Vec<ValidationIssue>,
}

impl Context {
    fn new(mode: DecodeMode) -> Self {
        Context {
            mode,
            path: Vec::new(),
            issues: Vec::new(),
        }
    }

    fn strict(&self) -> bool {
        self.mode == DecodeMode::Strict
    }

    fn path_string(&self) -> String {
        if self.path.is_empty() {
            "/".to_string()
        } else {
            format!("/{}", self.path.join("/"))
        }
    }

    fn enter(&mut self, segment: impl Into<String>) {
        self.path.push(segment.into());
    }

    fn leave(&mut self) {
        self.path.pop();
    }

    fn error(&mut self, code: IssueCode, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            path: self.path_string(),
            code,
            message: message.into(),
        });
    }

    fn warning(&mut self, code: IssueCode, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Warning,
            path: self.path_string(),
            code,
            message: message.into(),
        });
    }

    /// Error in strict mode, warning in lax mode.
    fn strictness(&mut self, code: IssueCode, message: impl Into<String>) {
        if self.strict() {
            self.error(code, message);
        } else {
            self.warning(code, message);
        }
    }

    fn finish<T>(self, value: Option<T>) -> Result<Decoded<T>, DecodeError> {
        let has_errors = self.issues.iter().any(ValidationIssue::is_error);
        match value {
            Some(value) if !has_errors => Ok(Decoded {
                value,
                warnings: self.issues,
            }),
            _ => Err(DecodeError::Invalid(self.issues)),
        }
    }
}

const REPORT_KEYS: &[&str] = &["subject", "attributes", "producer"];
const ASSERTION_KEYS: &[&str] = &["attribute", "conditions", "target", "evidence"];
const DESCRIPTOR_KEYS: &[&str] = &[
    "name",
    "uri",
    "digest",
    "downloadLocation",
    "mediaType",
    "content",
];
const LEGACY_KEYS: &[&str] = &["objectType", "locationURI"];

fn decode_report_value(cx: &mut Context, value: &Value) -> Option<Report> {
    let map = expect_map(cx, value, "report")?;
    flag_unknown_keys(cx, map, REPORT_KEYS, &[]);

    let subject = match map.get("subject") {
        Some(v) => {
            cx.enter("subject");
            let subject = decode_descriptor_value(cx, v);
            if let Some(rd) = &subject {
                let digest_missing = rd.digest.as_ref().is_none_or(DigestSet::is_empty);
                if digest_missing {
                    cx.error(
                        IssueCode::SubjectDigestRequired,
                        "subject must carry at least the digest field",
                    );
                }
            }
            cx.leave();
            subject
        }
        None => {
            cx.enter("subject");
            cx.error(IssueCode::MissingField, "report requires a subject");
            cx.leave();
            None
        }
    };

    let attributes = match map.get("attributes") {
        Some(Value::Array(items)) => {
            cx.enter("attributes");
            if items.is_empty() {
                cx.error(
                    IssueCode::EmptyAttributes,
                    "attributes requires one or more assertions",
                );
            }
            let mut assertions = Vec::with_capacity(items.len());
            for (index, item) in items.iter().enumerate() {
                cx.enter(index.to_string());
                if let Some(assertion) = decode_assertion_value(cx, item) {
                    assertions.push(assertion);
                }
                cx.leave();
            }
            cx.leave();
            Some(assertions)
        }
        Some(_) => {
            cx.enter("attributes");
            cx.error(IssueCode::WrongType, "attributes must be a list");
            cx.leave();
            None
        }
        None => {
            cx.enter("attributes");
            cx.error(IssueCode::MissingField, "report requires attributes");
            cx.leave();
            None
        }
    };

    // outer None = field failed to decode; inner None = field absent
    let producer: Option<Option<ResourceDescriptor>> = match map.get("producer") {
        Some(v) => {
            cx.enter("producer");
            let producer = decode_descriptor_value(cx, v);
            cx.leave();
            producer.map(Some)
        }
        None => Some(None),
    };

    Some(Report {
        subject: subject?,
        attributes: attributes?,
        producer: producer?,
    })
}

fn decode_assertion_value(cx: &mut Context, value: &Value) -> Option<AttributeAssertion> {
    let map = expect_map(cx, value, "assertion")?;
    flag_unknown_keys(cx, map, ASSERTION_KEYS, &[]);

    let attribute = match map.get("attribute") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
        Some(Value::String(_)) => {
            cx.enter("attribute");
            cx.error(IssueCode::MissingAttribute, "attribute must not be blank");
            cx.leave();
            None
        }
        Some(_) => {
            cx.enter("attribute");
            cx.error(IssueCode::WrongType, "attribute must be text");
            cx.leave();
            None
        }
        None => {
            cx.enter("attribute");
            cx.error(IssueCode::MissingAttribute, "assertion requires an attribute");
            cx.leave();
            None
        }
    };

    // every field is scanned even after a failure, so all issues surface;
    // outer None = field failed to decode, inner None = field absent
    let conditions: Option<Option<Conditions>> = match map.get("conditions") {
        Some(v) => {
            cx.enter("conditions");
            let conditions = decode_conditions_value(cx, v);
            cx.leave();
            conditions.map(Some)
        }
        None => Some(None),
    };

    let target: Option<Option<ResourceDescriptor>> = match map.get("target") {
        Some(v) => {
            cx.enter("target");
            let target = decode_descriptor_value(cx, v);
            cx.leave();
            target.map(Some)
        }
        None => Some(None),
    };

    let evidence: Option<Option<ResourceDescriptor>> = match map.get("evidence") {
        Some(v) => {
            cx.enter("evidence");
            let evidence = decode_descriptor_value(cx, v);
            if let Some(rd) = &evidence {
                if rd.digest.as_ref().is_none_or(DigestSet::is_empty) {
                    cx.strictness(
                        IssueCode::EvidenceDigestMissing,
                        "evidence without a digest cannot be integrity-checked",
                    );
                }
            }
            cx.leave();
            evidence.map(Some)
        }
        None => Some(None),
    };

    Some(AttributeAssertion {
        attribute: attribute?,
        conditions: conditions?,
        target: target?,
        evidence: evidence?,
    })
}

fn decode_conditions_value(cx: &mut Context, value: &Value) -> Option<Conditions> {
    let map = match value {
        Value::Object(map) => map,
        _ => {
            cx.error(IssueCode::ConditionsNotMap, "conditions must be an object");
            return None;
        }
    };
    let conditions = Conditions { body: map.clone() };
    if conditions.type_discriminator().is_none() {
        cx.strictness(
            IssueCode::ConditionsTypeMissing,
            "conditions must be self-describing via a \"type\" member",
        );
    }
    Some(conditions)
}

fn decode_descriptor_value(cx: &mut Context, value: &Value) -> Option<ResourceDescriptor> {
    let map = expect_map(cx, value, "resource descriptor")?;

    // Legacy object references are recognized by their distinctive members
    // and upgraded in place during lax decode. Strict mode treats the
    // legacy members as unknown keys instead.
    let legacy_present = LEGACY_KEYS.iter().any(|k| map.contains_key(*k));
    if legacy_present && !cx.strict() {
        return decode_legacy_reference(cx, map).map(ResourceDescriptor::from);
    }
    flag_unknown_keys(cx, map, DESCRIPTOR_KEYS, &[]);

    let name = get_text(cx, map, "name");
    let uri = get_uri(cx, map, "uri");
    let download_location = get_uri(cx, map, "downloadLocation");
    let media_type = get_text(cx, map, "mediaType");
    let digest = match map.get("digest") {
        Some(v) => {
            cx.enter("digest");
            let digest = decode_digest_set_value(cx, v);
            cx.leave();
            digest
        }
        None => None,
    };
    let content = match map.get("content") {
        Some(Value::String(encoded)) => match BASE64.decode(encoded.as_bytes()) {
            Ok(bytes) => Some(bytes),
            Err(_) => {
                cx.enter("content");
                cx.error(IssueCode::InvalidContent, "content must be base64 text");
                cx.leave();
                None
            }
        },
        Some(_) => {
            cx.enter("content");
            cx.error(IssueCode::WrongType, "content must be base64 text");
            cx.leave();
            None
        }
        None => None,
    };

    if name.is_none() && uri.is_none() && digest.is_none() {
        cx.error(
            IssueCode::DescriptorIncomplete,
            "descriptor requires at least one of name, uri, digest",
        );
        return None;
    }

    Some(ResourceDescriptor {
        name,
        uri,
        digest,
        download_location,
        media_type,
        content,
    })
}

fn decode_legacy_reference(
    cx: &mut Context,
    map: &Map<String, Value>,
) -> Option<LegacyObjectReference> {
    cx.warning(
        IssueCode::LegacyUpgraded,
        "legacy object reference upgraded to a resource descriptor",
    );
    for (modern, legacy) in [("mediaType", "objectType"), ("uri", "locationURI")] {
        if map.contains_key(modern) && map.contains_key(legacy) {
            cx.warning(
                IssueCode::LegacyKeyConflict,
                format!("both {legacy} and {modern} present; keeping {modern}"),
            );
        }
    }
    let allowed: Vec<&str> = DESCRIPTOR_KEYS.iter().chain(LEGACY_KEYS).copied().collect();
    flag_unknown_keys(cx, map, &allowed, &[]);

    let name = get_text(cx, map, "name");
    if name.is_none() && !map.contains_key("name") {
        cx.enter("name");
        cx.error(IssueCode::MissingField, "legacy reference requires a name");
        cx.leave();
    }
    let digest = match map.get("digest") {
        Some(v) => {
            cx.enter("digest");
            let digest = decode_digest_set_value(cx, v);
            cx.leave();
            digest
        }
        None => {
            cx.enter("digest");
            cx.error(IssueCode::MissingField, "legacy reference requires a digest");
            cx.leave();
            None
        }
    };

    // the modern member wins when both spellings are present
    let location_uri = if map.contains_key("uri") {
        get_uri(cx, map, "uri")
    } else {
        get_uri(cx, map, "locationURI")
    };
    let object_type = if map.contains_key("mediaType") {
        get_text(cx, map, "mediaType")
    } else {
        get_text(cx, map, "objectType")
    };

    Some(LegacyObjectReference {
        object_type,
        name: name?,
        digest: digest?,
        location_uri,
    })
}

fn decode_digest_set_value(cx: &mut Context, value: &Value) -> Option<DigestSet> {
    let map = match value {
        Value::Object(map) => map,
        _ => {
            cx.error(IssueCode::WrongType, "digest must be an object");
            return None;
        }
    };
    if map.is_empty() {
        cx.error(IssueCode::EmptyDigestSet, "digest requires at least one entry");
        return None;
    }
    let mut entries = std::collections::BTreeMap::new();
    let mut sound = true;
    for (algorithm, value) in map {
        cx.enter(algorithm.clone());
        let text = match value {
            Value::String(s) => Some(s.clone()),
            _ => {
                cx.error(IssueCode::WrongType, "digest value must be text");
                sound = false;
                None
            }
        };
        if !is_algorithm_token(algorithm) {
            cx.strictness(
                IssueCode::InvalidAlgorithmId,
                format!("\"{algorithm}\" is not a lowercase ASCII token"),
            );
            if cx.strict() {
                sound = false;
            }
        } else if let Some(expected_len) = registered_hex_len(algorithm) {
            if let Some(text) = &text {
                if !is_lower_hex(text) {
                    cx.error(
                        IssueCode::InvalidDigestHex,
                        format!("{algorithm} value must be lowercase hex"),
                    );
                    sound = false;
                } else if text.len() != expected_len {
                    cx.error(
                        IssueCode::BadDigestLength,
                        format!(
                            "{algorithm} value must be {expected_len} hex chars, got {}",
                            text.len()
                        ),
                    );
                    sound = false;
                }
            }
        } else {
            // unregistered algorithms are carried opaquely in lax mode
            cx.strictness(
                IssueCode::UnregisteredAlgorithm,
                format!("\"{algorithm}\" is not a registered algorithm"),
            );
            if cx.strict() {
                sound = false;
            }
        }
        if let Some(text) = text {
            entries.insert(algorithm.clone(), text);
        }
        cx.leave();
    }
    if !sound || entries.is_empty() {
        return None;
    }
    Some(DigestSet { entries })
}

fn is_algorithm_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '-' | '_' | '+' | '.'))
}

fn is_lower_hex(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c))
}

fn expect_map<'v>(
    cx: &mut Context,
    value: &'v Value,
    what: &str,
) -> Option<&'v Map<String, Value>> {
    match value {
        Value::Object(map) => Some(map),
        _ => {
            cx.error(IssueCode::WrongType, format!("{what} must be a JSON object"));
            None
        }
    }
}

fn flag_unknown_keys(
    cx: &mut Context,
    map: &Map<String, Value>,
    known: &[&str],
    also_allowed: &[&str],
) {
    for key in map.keys() {
        if !known.contains(&key.as_str()) && !also_allowed.contains(&key.as_str()) {
            cx.enter(key.clone());
            cx.strictness(IssueCode::UnknownKey, format!("unknown member \"{key}\""));
            cx.leave();
        }
    }
}

fn get_text(cx: &mut Context, map: &Map<String, Value>, key: &str) -> Option<String> {
    match map.get(key) {
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            cx.enter(key);
            cx.error(IssueCode::WrongType, format!("{key} must be text"));
            cx.leave();
            None
        }
        None => None,
    }
}

fn get_uri(cx: &mut Context, map: &Map<String, Value>, key: &str) -> Option<String> {
    let text = get_text(cx, map, key)?;
    if url::Url::parse(&text).is_err() {
        cx.enter(key);
        cx.error(IssueCode::InvalidUri, format!("{key} is not a valid URI"));
        cx.leave();
        return None;
    }
    Some(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn decode_lax(doc: &Value) -> Result<Decoded<Report>, DecodeError> {
        decode_report(serde_json::to_vec(doc).unwrap().as_slice(), DecodeMode::Lax)
    }

    fn decode_strict(doc: &Value) -> Result<Decoded<Report>, DecodeError> {
        decode_report(
            serde_json::to_vec(doc).unwrap().as_slice(),
            DecodeMode::Strict,
        )
    }

    fn sha256_of(byte: u8) -> String {
        hex::encode([byte; 32])
    }

    fn valid_report() -> Value {
        json!({
            "subject": {"name": "hello-world", "digest": {"sha256": sha256_of(1)}},
            "attributes": [
                {"attribute": "WITH_STACK_PROTECTION",
                 "conditions": {"flags": "-fstack-protector*"}}
            ]
        })
    }

    #[test]
    fn decodes_valid_report() {
        let decoded = decode_lax(&valid_report()).unwrap();
        assert_eq!(decoded.value.attributes.len(), 1);
        assert_eq!(decoded.value.attributes[0].attribute, "WITH_STACK_PROTECTION");
    }

    #[test]
    fn empty_attributes_is_an_error_at_path() {
        let mut doc = valid_report();
        doc["attributes"] = json!([]);
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!("expected Invalid")
        };
        assert!(issues
            .iter()
            .any(|i| i.code == IssueCode::EmptyAttributes && i.path == "/attributes"));
    }

    #[test]
    fn subject_without_digest_is_rejected() {
        let mut doc = valid_report();
        doc["subject"] = json!({"name": "x", "uri": "http://example.com/x"});
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!("expected Invalid")
        };
        assert!(issues
            .iter()
            .any(|i| i.code == IssueCode::SubjectDigestRequired));
    }

    #[test]
    fn malformed_json_is_distinct() {
        assert!(matches!(
            decode_report(b"{ not json", DecodeMode::Lax),
            Err(DecodeError::MalformedJson(_))
        ));
    }

    #[test]
    fn assertion_with_conditions_only() {
        let doc = json!({
            "attribute": "WITH_STACK_PROTECTION",
            "conditions": {"flags": "-fstack-protector*"}
        });
        let decoded =
            decode_assertion(serde_json::to_vec(&doc).unwrap().as_slice(), DecodeMode::Lax)
                .unwrap();
        assert!(decoded.value.target.is_none());
        assert!(decoded.value.evidence.is_none());
        assert_eq!(
            decoded.value.conditions.unwrap().body["flags"],
            json!("-fstack-protector*")
        );
    }

    #[test]
    fn blank_attribute_is_missing_attribute() {
        let doc = json!({"attribute": ""});
        let err = decode_assertion(serde_json::to_vec(&doc).unwrap().as_slice(), DecodeMode::Lax)
            .unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!("expected Invalid")
        };
        assert!(issues.iter().any(|i| i.code == IssueCode::MissingAttribute));
    }

    #[test]
    fn unknown_top_level_key_warns_in_lax_errors_in_strict() {
        let mut doc = valid_report();
        doc["extra"] = json!(1);
        let decoded = decode_lax(&doc).unwrap();
        assert!(decoded
            .warnings
            .iter()
            .any(|i| i.code == IssueCode::UnknownKey && i.path == "/extra"));
        assert!(decode_strict(&doc).is_err());
    }

    #[test]
    fn strict_requires_conditions_type() {
        let doc = valid_report();
        let err = decode_strict(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!("expected Invalid")
        };
        assert!(issues.iter().any(|i| i.code == IssueCode::ConditionsTypeMissing
            && i.path == "/attributes/0/conditions"));

        let mut typed = valid_report();
        typed["attributes"][0]["conditions"]["type"] = json!("scai-kit/flag-conditions/v1");
        assert!(decode_strict(&typed).is_ok());
    }

    #[test]
    fn evidence_digest_strictness() {
        let mut doc = valid_report();
        doc["attributes"][0]["evidence"] = json!({"name": "ev", "uri": "http://example.com/e"});
        let decoded = decode_lax(&doc).unwrap();
        assert!(decoded
            .warnings
            .iter()
            .any(|i| i.code == IssueCode::EvidenceDigestMissing));
        assert!(decode_strict(&doc).is_err());
    }

    #[test]
    fn bad_digests_are_errors_even_in_lax() {
        let mut doc = valid_report();
        doc["subject"]["digest"] = json!({"sha256": "UPPERCASE"});
        assert!(decode_lax(&doc).is_err());

        doc["subject"]["digest"] = json!({"sha256": "abcd"});
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!()
        };
        assert!(issues.iter().any(|i| i.code == IssueCode::BadDigestLength
            && i.path == "/subject/digest/sha256"));
    }

    #[test]
    fn unregistered_algorithm_carried_in_lax_rejected_in_strict() {
        let mut doc = valid_report();
        doc["subject"]["digest"] = json!({"blake3": "0011"});
        let decoded = decode_lax(&doc).unwrap();
        assert_eq!(decoded.value.subject.digest.unwrap().get("blake3"), Some("0011"));
        assert!(decoded
            .warnings
            .iter()
            .any(|i| i.code == IssueCode::UnregisteredAlgorithm));
        assert!(decode_strict(&doc).is_err());
    }

    #[test]
    fn invalid_uri_is_an_error() {
        let mut doc = valid_report();
        doc["subject"]["uri"] = json!("not a uri");
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!()
        };
        assert!(issues
            .iter()
            .any(|i| i.code == IssueCode::InvalidUri && i.path == "/subject/uri"));
    }

    #[test]
    fn legacy_reference_upgrades_in_lax() {
        let mut doc = valid_report();
        doc["attributes"][0]["evidence"] = json!({
            "name": "gcc9.3.0-endorsement",
            "digest": {"sha256": sha256_of(0xab)},
            "locationURI": "http://example.com/scai-reports/",
            "objectType": "scai/report/v0.1"
        });
        let decoded = decode_lax(&doc).unwrap();
        let evidence = decoded.value.attributes[0].evidence.as_ref().unwrap();
        assert_eq!(evidence.uri.as_deref(), Some("http://example.com/scai-reports/"));
        assert_eq!(evidence.media_type.as_deref(), Some("scai/report/v0.1"));
        assert!(decoded
            .warnings
            .iter()
            .any(|i| i.code == IssueCode::LegacyUpgraded));
        // strict mode refuses the legacy members
        assert!(decode_strict(&doc).is_err());
    }

    #[test]
    fn validation_is_exhaustive() {
        // three distinct violations yield at least three issues
        let doc = json!({
            "subject": {"name": "x", "uri": "http://example.com/x"},
            "attributes": [
                {"attribute": ""},
                {"attribute": "OK", "conditions": "not-a-map"}
            ]
        });
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!()
        };
        let errors: Vec<_> = issues.iter().filter(|i| i.is_error()).collect();
        assert!(errors.len() >= 3, "got {errors:?}");
        assert!(issues.iter().any(|i| i.path == "/attributes/1/conditions"));
    }

    #[test]
    fn all_fields_of_one_assertion_are_scanned_after_a_failure() {
        // a bad conditions member must not hide the bad target and evidence
        let doc = json!({
            "subject": {"digest": {"sha256": sha256_of(3)}},
            "attributes": [{
                "attribute": "X",
                "conditions": "not-a-map",
                "target": {"mediaType": "only-a-media-type"},
                "evidence": {"digest": {}}
            }]
        });
        let err = decode_lax(&doc).unwrap_err();
        let DecodeError::Invalid(issues) = err else {
            panic!()
        };
        for expected_path in [
            "/attributes/0/conditions",
            "/attributes/0/target",
            "/attributes/0/evidence/digest",
        ] {
            assert!(
                issues.iter().any(|i| i.path == expected_path && i.is_error()),
                "missing issue at {expected_path}: {issues:?}"
            );
        }
    }

    #[test]
    fn roundtrip_preserves_fields() {
        let doc = json!({
            "subject": {"name": "s", "digest": {"sha256": sha256_of(9)}},
            "attributes": [{
                "attribute": "A",
                "conditions": {"type": "t", "flags": "-O2"},
                "target": {"name": "t", "digest": {"sha256": sha256_of(7)}},
                "evidence": {"name": "e", "digest": {"sha256": sha256_of(8)}}
            }],
            "producer": {"uri": "http://example.com/builder"}
        });
        let decoded = decode_strict(&doc).unwrap();
        let encoded = decoded.value.to_json_value();
        let again = decode_report(
            serde_json::to_vec(&encoded).unwrap().as_slice(),
            DecodeMode::Strict,
        )
        .unwrap();
        assert_eq!(again.value, decoded.value);
        assert_eq!(encoded, doc);
    }
}
