//! Declarative trust policies (trusted signers plus required/forbidden
//! attributes with condition and evidence constraints) and their evaluator
//! over a verified report.
//!
//! Matching asymmetry worth knowing: globs live on the POLICY side only.
//! Report-side condition values are matched literally, even when they
//! contain glob metacharacters. A report value of `-fstack-protector*`
//! (asterisk included, as producers sometimes record) matches the policy
//! pattern `-fstack-protector*` because the pattern's `*` covers the literal
//! asterisk — but the report value never acts as a pattern itself.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::canon::canonicalize;
use crate::envelope::{KeyError, KeyFile, TrustedKey, VerifiedReport};
use crate::model::{
    AttributeAssertion, DecodeMode, DigestMatch, DigestSet, IssueCode, Severity, ValidationIssue,
};
use crate::store::{ResolveError, Resolver};

/// Whole-value glob match: `*` matches any run of code points (including
/// empty), `?` matches exactly one code point, everything else is literal.
/// Case-sensitive.
pub fn match_glob(pattern: &str, value: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let v: Vec<char> = value.chars().collect();
    let (mut pi, mut vi) = (0usize, 0usize);
    let mut star: Option<usize> = None;
    let mut mark = 0usize;
    while vi < v.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == v[vi]) {
            pi += 1;
            vi += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = vi;
            pi += 1;
        } else if let Some(star_at) = star {
            pi = star_at + 1;
            mark += 1;
            vi = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Require,
    Forbid,
}

/// One policy rule over attribute assertions.
#[derive(Debug, Clone, Serialize)]
pub struct AttributeRule {
    pub kind: RuleKind,
    /// Glob over the assertion's attribute text.
    pub attribute_pattern: String,
    /// Key-path (slash-separated) into the conditions map, each mapped to a
    /// glob the value at that path must match.
    pub condition_matchers: Option<BTreeMap<String, String>>,
    /// Require the assertion's evidence to resolve with digest verification.
    pub require_evidence: bool,
    /// Glob the evidence mediaType must match.
    pub evidence_media_type: Option<String>,
    /// Digest set the assertion target must match.
    pub target_digest: Option<DigestSet>,
}

/// Parsed trust policy: signer set, signature threshold, rules, and the
/// validation mode to apply.
#[derive(Debug, Clone)]
pub struct TrustPolicy {
    pub trusted_keys: Vec<TrustedKey>,
    pub threshold: usize,
    pub rules: Vec<AttributeRule>,
    pub mode: DecodeMode,
    /// Set when the policy deliberately has no attribute rules.
    pub signature_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleVerdict {
    Satisfied,
    Violated,
    Missing,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleOutcome {
    pub rule_index: usize,
    pub matched_assertion_indices: Vec<usize>,
    pub outcome: RuleVerdict,
    pub detail: String,
}

/// The full evaluation result. All rules are always evaluated; nothing
/// short-circuits, so CI output is complete.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyVerdict {
    pub pass: bool,
    pub per_rule: Vec<RuleOutcome>,
    /// Assertions no rule matched; surfaced for visibility, never judged.
    pub unruled_assertion_indices: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("malformed policy: {}", format_issues(.0))]
    MalformedPolicy(Vec<ValidationIssue>),
    #[error("failed to load trusted key: {0}")]
    Key(#[from] KeyError),
    /// Evidence could not be obtained from any source. Infrastructure
    /// failure, distinct from a clean "missing" outcome.
    #[error("evidence unresolvable for rule {rule_index} (assertion {assertion_index}): {detail}")]
    EvidenceUnresolvable {
        rule_index: usize,
        assertion_index: usize,
        detail: String,
    },
    /// The verified signer set is not covered by this policy's keys.
    #[error("report signers are not trusted by this policy")]
    SignerNotTrusted,
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parse a policy document. Key file references are resolved relative to
/// `base_dir`; inline keys are base64 raw public key bytes.
pub fn parse_policy(document: &[u8], base_dir: &Path) -> Result<TrustPolicy, PolicyError> {
    let value: Value = serde_json::from_slice(document).map_err(|e| {
        PolicyError::MalformedPolicy(vec![issue("/", IssueCode::WrongType, e.to_string())])
    })?;
    let mut issues: Vec<ValidationIssue> = Vec::new();
    let Some(map) = value.as_object() else {
        return Err(PolicyError::MalformedPolicy(vec![issue(
            "/",
            IssueCode::WrongType,
            "policy must be a JSON object",
        )]));
    };

    let mut trusted_keys = Vec::new();
    match map.get("trustedKeys") {
        Some(Value::Array(entries)) if !entries.is_empty() => {
            for (i, entry) in entries.iter().enumerate() {
                match load_key_entry(entry, base_dir) {
                    Ok(key) => trusted_keys.push(key),
                    Err(msg) => issues.push(issue(
                        format!("/trustedKeys/{i}"),
                        IssueCode::WrongType,
                        msg,
                    )),
                }
            }
        }
        Some(Value::Array(_)) => issues.push(issue(
            "/trustedKeys",
            IssueCode::MissingField,
            "trustedKeys must be non-empty",
        )),
        Some(_) => issues.push(issue(
            "/trustedKeys",
            IssueCode::WrongType,
            "trustedKeys must be a list",
        )),
        None => issues.push(issue(
            "/trustedKeys",
            IssueCode::MissingField,
            "policy requires trustedKeys",
        )),
    }

    let threshold = match map.get("threshold") {
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 => n as usize,
            _ => {
                issues.push(issue(
                    "/threshold",
                    IssueCode::WrongType,
                    "threshold must be a count of at least 1",
                ));
                0
            }
        },
        None => 1,
    };

    let mode = match map.get("mode") {
        Some(Value::String(s)) if s == "strict" => DecodeMode::Strict,
        Some(Value::String(s)) if s == "lax" => DecodeMode::Lax,
        Some(_) => {
            issues.push(issue(
                "/mode",
                IssueCode::WrongType,
                "mode must be \"strict\" or \"lax\"",
            ));
            DecodeMode::Lax
        }
        None => DecodeMode::Lax,
    };

    let signature_only = map
        .get("signatureOnly")
        .and_then(Value::as_bool)
        .unwrap_or(false);

    let mut rules = Vec::new();
    match map.get("rules") {
        Some(Value::Array(entries)) => {
            for (i, entry) in entries.iter().enumerate() {
                match parse_rule(entry) {
                    Ok(rule) => rules.push(rule),
                    Err((suffix, message)) => issues.push(issue(
                        format!("/rules/{i}{suffix}"),
                        IssueCode::WrongType,
                        message,
                    )),
                }
            }
        }
        Some(_) => issues.push(issue(
            "/rules",
            IssueCode::WrongType,
            "rules must be a list",
        )),
        None => {}
    }

    if rules.is_empty() && !signature_only {
        issues.push(issue(
            "/rules",
            IssueCode::MissingField,
            "rules must be non-empty unless the policy is marked signatureOnly",
        ));
    }

    if issues.iter().any(ValidationIssue::is_error) {
        return Err(PolicyError::MalformedPolicy(issues));
    }

    Ok(TrustPolicy {
        trusted_keys,
        threshold,
        rules,
        mode,
        signature_only,
    })
}

fn issue(path: impl Into<String>, code: IssueCode, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        severity: Severity::Error,
        path: path.into(),
        code,
        message: message.into(),
    }
}

fn load_key_entry(entry: &Value, base_dir: &Path) -> Result<TrustedKey, String> {
    match entry {
        // a bare string is a key file reference
        Value::String(path) => {
            let resolved = base_dir.join(path);
            let file = KeyFile::load(&resolved).map_err(|e| e.to_string())?;
            file.trusted_key().map_err(|e| e.to_string())
        }
        // an object carries an inline public key
        Value::Object(map) => {
            if let Some(scheme) = map.get("scheme").and_then(Value::as_str) {
                if scheme != "ed25519" {
                    return Err(format!("unsupported scheme \"{scheme}\""));
                }
            }
            let encoded = map
                .get("public")
                .and_then(Value::as_str)
                .ok_or("inline key requires a \"public\" member")?;
            TrustedKey::from_public_base64(encoded).map_err(|e| e.to_string())
        }
        _ => Err("trustedKeys entries are key file paths or {public} objects".to_string()),
    }
}

type RuleParseError = (String, String);

fn parse_rule(entry: &Value) -> Result<AttributeRule, RuleParseError> {
    let map = entry
        .as_object()
        .ok_or(("".to_string(), "rule must be an object".to_string()))?;
    let kind = match map.get("kind").and_then(Value::as_str) {
        Some("require") | None => RuleKind::Require,
        Some("forbid") => RuleKind::Forbid,
        Some(other) => {
            return Err((
                "/kind".to_string(),
                format!("kind must be \"require\" or \"forbid\", got \"{other}\""),
            ))
        }
    };
    let attribute_pattern = map
        .get("attribute")
        .and_then(Value::as_str)
        .map(str::to_string)
        .filter(|s| !s.is_empty())
        .ok_or((
            "/attribute".to_string(),
            "rule requires a non-empty attribute pattern".to_string(),
        ))?;
    let condition_matchers = match map.get("conditions") {
        Some(Value::Object(entries)) => {
            let mut matchers = BTreeMap::new();
            for (key_path, glob) in entries {
                let Some(glob) = glob.as_str() else {
                    return Err((
                        format!("/conditions/{key_path}"),
                        "condition matcher must be glob text".to_string(),
                    ));
                };
                matchers.insert(key_path.clone(), glob.to_string());
            }
            Some(matchers)
        }
        Some(_) => {
            return Err((
                "/conditions".to_string(),
                "conditions must be an object of key-path to glob".to_string(),
            ))
        }
        None => None,
    };
    let require_evidence = map
        .get("requireEvidence")
        .and_then(Value::as_bool)
        .unwrap_or(false);
    let evidence_media_type = map
        .get("evidenceMediaType")
        .and_then(Value::as_str)
        .map(str::to_string);
    let target_digest = match map.get("targetDigest") {
        Some(Value::Object(entries)) => {
            let mut digest = BTreeMap::new();
            for (alg, v) in entries {
                let Some(v) = v.as_str() else {
                    return Err((
                        format!("/targetDigest/{alg}"),
                        "digest values must be text".to_string(),
                    ));
                };
                digest.insert(alg.clone(), v.to_string());
            }
            Some(DigestSet { entries: digest })
        }
        Some(_) => {
            return Err((
                "/targetDigest".to_string(),
                "targetDigest must be a digest set".to_string(),
            ))
        }
        None => None,
    };
    Ok(AttributeRule {
        kind,
        attribute_pattern,
        condition_matchers,
        require_evidence,
        evidence_media_type,
        target_digest,
    })
}

/// Traverse slash-separated segments into a conditions body. Map members by
/// name, list items by zero-based index.
fn value_at_path<'v>(body: &'v serde_json::Map<String, Value>, key_path: &str) -> Option<&'v Value> {
    let mut segments = key_path.split('/');
    let first = segments.next()?;
    let mut current = body.get(first)?;
    for segment in segments {
        current = match current {
            Value::Object(map) => map.get(segment)?,
            Value::Array(items) => items.get(segment.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(current)
}

/// Text form a condition value is matched against: strings as-is, everything
/// else by its canonical JSON rendering.
fn condition_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => String::from_utf8_lossy(canonicalize(other).as_bytes()).into_owned(),
    }
}

/// Evaluate a verified report against a policy.
///
/// The signer set is re-checked against the policy's trusted keys and
/// threshold. Each rule is evaluated over all assertions; nothing
/// short-circuits.
pub fn evaluate(
    verified: &VerifiedReport,
    policy: &TrustPolicy,
    resolver: &Resolver,
) -> Result<PolicyVerdict, PolicyError> {
    // the verified signer set must sit inside this policy's keys and still
    // clear its threshold
    let policy_ids: Vec<&str> = policy.trusted_keys.iter().map(TrustedKey::key_id).collect();
    let all_trusted = verified
        .signer_key_ids
        .iter()
        .all(|id| policy_ids.contains(&id.as_str()));
    if !all_trusted
        || verified.signer_key_ids.is_empty()
        || verified.signer_key_ids.len() < policy.threshold
    {
        return Err(PolicyError::SignerNotTrusted);
    }

    let assertions = &verified.report.attributes;
    let mut per_rule = Vec::with_capacity(policy.rules.len());
    let mut ruled: Vec<bool> = vec![false; assertions.len()];

    for (rule_index, rule) in policy.rules.iter().enumerate() {
        let mut matched: Vec<usize> = Vec::new();
        let mut near_misses: Vec<String> = Vec::new();

        for (assertion_index, assertion) in assertions.iter().enumerate() {
            if !match_glob(&rule.attribute_pattern, &assertion.attribute) {
                continue;
            }
            ruled[assertion_index] = true;
            match assertion_satisfies(rule, assertion, resolver) {
                Ok(()) => matched.push(assertion_index),
                Err(CheckFailure::Constraint(reason)) => {
                    near_misses.push(format!("assertion {assertion_index}: {reason}"));
                }
                Err(CheckFailure::Unresolvable(detail)) => {
                    return Err(PolicyError::EvidenceUnresolvable {
                        rule_index,
                        assertion_index,
                        detail,
                    });
                }
            }
        }

        let (outcome, detail) = match rule.kind {
            RuleKind::Require => {
                if !matched.is_empty() {
                    (
                        RuleVerdict::Satisfied,
                        format!("satisfied by assertion(s) {matched:?}"),
                    )
                } else if near_misses.is_empty() {
                    (
                        RuleVerdict::Missing,
                        format!("no assertion matches \"{}\"", rule.attribute_pattern),
                    )
                } else {
                    (RuleVerdict::Missing, near_misses.join("; "))
                }
            }
            RuleKind::Forbid => {
                if matched.is_empty() {
                    (RuleVerdict::Satisfied, "no forbidden assertion".to_string())
                } else {
                    (
                        RuleVerdict::Violated,
                        format!("forbidden assertion(s) {matched:?} present"),
                    )
                }
            }
        };
        per_rule.push(RuleOutcome {
            rule_index,
            matched_assertion_indices: matched,
            outcome,
            detail,
        });
    }

    let pass = per_rule
        .iter()
        .all(|r| r.outcome == RuleVerdict::Satisfied);
    let unruled_assertion_indices = ruled
        .iter()
        .enumerate()
        .filter(|(_, covered)| !**covered)
        .map(|(i, _)| i)
        .collect();

    Ok(PolicyVerdict {
        pass,
        per_rule,
        unruled_assertion_indices,
    })
}

enum CheckFailure {
    /// The assertion fails this rule; a policy-level outcome.
    Constraint(String),
    /// Evidence infrastructure failure; aborts evaluation.
    Unresolvable(String),
}

fn assertion_satisfies(
    rule: &AttributeRule,
    assertion: &AttributeAssertion,
    resolver: &Resolver,
) -> Result<(), CheckFailure> {
    if let Some(matchers) = &rule.condition_matchers {
        let Some(conditions) = &assertion.conditions else {
            return Err(CheckFailure::Constraint("assertion has no conditions".into()));
        };
        for (key_path, glob) in matchers {
            let Some(value) = value_at_path(&conditions.body, key_path) else {
                return Err(CheckFailure::Constraint(format!(
                    "condition key \"{key_path}\" absent"
                )));
            };
            let text = condition_text(value);
            if !match_glob(glob, &text) {
                return Err(CheckFailure::Constraint(format!(
                    "condition \"{key_path}\" value \"{text}\" does not match \"{glob}\""
                )));
            }
        }
    }

    if let Some(media_glob) = &rule.evidence_media_type {
        let media = assertion
            .evidence
            .as_ref()
            .and_then(|e| e.media_type.as_deref());
        match media {
            Some(value) if match_glob(media_glob, value) => {}
            Some(value) => {
                return Err(CheckFailure::Constraint(format!(
                    "evidence mediaType \"{value}\" does not match \"{media_glob}\""
                )))
            }
            None => {
                return Err(CheckFailure::Constraint(
                    "evidence mediaType absent".to_string(),
                ))
            }
        }
    }

    if let Some(expected) = &rule.target_digest {
        let Some(target_digest) = assertion.target.as_ref().and_then(|t| t.digest.as_ref())
        else {
            return Err(CheckFailure::Constraint("target digest absent".to_string()));
        };
        if target_digest.compare(expected) != DigestMatch::Match {
            return Err(CheckFailure::Constraint(
                "target digest does not match the required digest".to_string(),
            ));
        }
    }

    if rule.require_evidence && rule.kind == RuleKind::Require {
        let Some(evidence) = &assertion.evidence else {
            return Err(CheckFailure::Constraint("assertion has no evidence".into()));
        };
        if evidence.digest.as_ref().is_none_or(DigestSet::is_empty) {
            return Err(CheckFailure::Constraint(
                "evidence has no digest to verify".to_string(),
            ));
        }
        match resolver.resolve(evidence) {
            Ok(resolved) if !resolved.verified_algorithms.is_empty() => {}
            Ok(_) => {
                return Err(CheckFailure::Constraint(
                    "evidence resolved without digest verification".to_string(),
                ))
            }
            // tampered evidence is a policy failure, not infrastructure
            Err(err @ ResolveError::IntegrityMismatch { .. })
            | Err(err @ ResolveError::NoOverlapDigest { .. }) => {
                return Err(CheckFailure::Constraint(format!(
                    "evidence unresolvable: {err}"
                )))
            }
            Err(other) => return Err(CheckFailure::Unresolvable(other.to_string())),
        }
    }

    Ok(())
}
