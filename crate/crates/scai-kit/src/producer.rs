//! Toolchain wrapper: runs a command, hashes its declared outputs, derives
//! attribute assertions from configured rules over the command line and
//! environment, and emits one signed envelope per output.
//!
//! Rule matching over argv is whole-token and anchored: the pattern
//! `-fstack-protector*` matches the token `-fstack-protector-strong` but not
//! `-fno-stack-protector`, because matching starts at the first character of
//! the token. Interplay between positive and negative flag spellings (a
//! later `-fno-*` overriding an earlier flag) is out of scope.
//!
//! Environment capture is allowlist-only: the wrapper reads exactly the
//! variables named by rule triggers and never dumps the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::envelope::{sign_report_with_mode, Envelope, KeyPair, SignError};
use crate::model::{
    AttributeAssertion, Conditions, DecodeMode, Report, ResourceDescriptor,
};
use crate::store::sha256_digest;

/// Discriminator written into recorded conditions so strict signing passes.
pub const FLAG_CONDITIONS_TYPE: &str = "scai-kit/flag-conditions/v1";

/// One attribute derivation rule. At least one trigger must be set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProducerRule {
    pub attribute: String,
    /// Glob matched against whole argv tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when_flag_matches: Option<String>,
    /// Environment variable name to glob over its value; every entry must
    /// match for the rule to trigger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when_env_matches: Option<BTreeMap<String, String>>,
    /// Record what triggered the rule under the assertion's conditions.
    #[serde(default = "default_true")]
    pub record_conditions: bool,
    /// Path of a file to attach as evidence, hashed at emit time. The token
    /// `{output}` expands to the current output path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_from: Option<String>,
}

fn default_true() -> bool {
    true
}

/// Wrapper configuration: rules, an optional baseline attribute emitted when
/// nothing triggers, and the producer descriptor stamped into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleSet {
    pub rules: Vec<ProducerRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_attribute: Option<String>,
    /// Configuration, not introspection: the wrapper stamps this descriptor
    /// as-is.
    pub producer_descriptor: ResourceDescriptor,
    /// When set, the file at this path is hashed into the producer
    /// descriptor's digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producer_binary: Option<PathBuf>,
    /// Emit conditions without a type discriminator (the upstream example
    /// layout) and sign lax. Off by default.
    #[serde(default)]
    pub untyped_conditions: bool,
}

impl RuleSet {
    pub fn from_json(bytes: &[u8]) -> Result<RuleSet, ProducerError> {
        let ruleset: RuleSet = serde_json::from_slice(bytes)
            .map_err(|e| ProducerError::MalformedRuleSet(e.to_string()))?;
        for (index, rule) in ruleset.rules.iter().enumerate() {
            if rule.when_flag_matches.is_none() && rule.when_env_matches.is_none() {
                return Err(ProducerError::RuleWithoutTrigger { index });
            }
        }
        Ok(ruleset)
    }
}

/// What happened: the exact argv, exit code, hashed outputs, and timing.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub argv: Vec<String>,
    pub exit_code: i32,
    pub output_descriptors: Vec<ResourceDescriptor>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum ProducerError {
    #[error("malformed rule set: {0}")]
    MalformedRuleSet(String),
    #[error("rule {index} has no trigger (whenFlagMatches or whenEnvMatches)")]
    RuleWithoutTrigger { index: usize },
    #[error("command argv must be non-empty")]
    EmptyCommand,
    #[error("failed to start {command}: {source}")]
    CommandSpawnFailed {
        command: String,
        source: std::io::Error,
    },
    /// Non-zero exit. No envelope is emitted.
    #[error("command exited with status {status}")]
    CommandFailed { status: i32 },
    #[error("declared output {0} absent after the run")]
    OutputMissing(PathBuf),
    /// Zero rules matched and no baseline attribute is configured. A report
    /// requires one or more assertions, so nothing is emitted.
    #[error("no rule matched and no baseline attribute is configured")]
    NoAttributes,
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sign(#[from] SignError),
}

/// Run the command verbatim, hash the declared outputs, derive assertions
/// from the rules, and sign one envelope per output file.
pub fn run_and_attest(
    argv: &[String],
    outputs: &[PathBuf],
    rules: &RuleSet,
    signer: &KeyPair,
) -> Result<(Vec<Envelope>, RunRecord), ProducerError> {
    if argv.is_empty() {
        return Err(ProducerError::EmptyCommand);
    }

    let started_at = Utc::now();
    let status = Command::new(&argv[0])
        .args(&argv[1..])
        .status()
        .map_err(|source| ProducerError::CommandSpawnFailed {
            command: argv[0].clone(),
            source,
        })?;
    let finished_at = Utc::now();
    let exit_code = status.code().unwrap_or(-1);
    if !status.success() {
        return Err(ProducerError::CommandFailed { status: exit_code });
    }

    let mut output_descriptors = Vec::with_capacity(outputs.len());
    for output in outputs {
        if !output.exists() {
            return Err(ProducerError::OutputMissing(output.clone()));
        }
        output_descriptors.push(describe_file(output)?);
    }

    let matches = match_rules(rules, argv)?;
    let producer = producer_descriptor(rules)?;
    let mode = if rules.untyped_conditions {
        DecodeMode::Lax
    } else {
        DecodeMode::Strict
    };

    let mut envelopes = Vec::with_capacity(outputs.len());
    for (output, subject) in outputs.iter().zip(&output_descriptors) {
        let attributes = build_assertions(rules, &matches, output)?;
        let report = Report {
            subject: subject.clone(),
            attributes,
            producer: Some(producer.clone()),
        };
        envelopes.push(sign_report_with_mode(
            &report,
            signer,
            crate::envelope::PAYLOAD_TYPE,
            mode,
        )?);
    }

    let record = RunRecord {
        argv: argv.to_vec(),
        exit_code,
        output_descriptors,
        started_at,
        finished_at,
    };
    Ok((envelopes, record))
}

/// How a rule triggered: the argv tokens its flag glob matched, and the
/// environment values its env matchers matched.
#[derive(Debug, Clone)]
struct RuleMatch {
    rule_index: usize,
    flag_tokens: Vec<String>,
    env_values: BTreeMap<String, String>,
}

fn match_rules(rules: &RuleSet, argv: &[String]) -> Result<Vec<RuleMatch>, ProducerError> {
    let mut matches = Vec::new();
    for (rule_index, rule) in rules.rules.iter().enumerate() {
        let mut flag_tokens = Vec::new();
        if let Some(pattern) = &rule.when_flag_matches {
            // whole tokens only, position-independent
            flag_tokens = argv
                .iter()
                .filter(|token| crate::policy::match_glob(pattern, token))
                .cloned()
                .collect();
        }
        let mut env_values = BTreeMap::new();
        let mut env_triggered = false;
        if let Some(matchers) = &rule.when_env_matches {
            env_triggered = true;
            for (name, glob) in matchers {
                match std::env::var(name) {
                    Ok(value) if crate::policy::match_glob(glob, &value) => {
                        env_values.insert(name.clone(), value);
                    }
                    _ => {
                        env_triggered = false;
                        break;
                    }
                }
            }
        }
        if !flag_tokens.is_empty() || env_triggered {
            matches.push(RuleMatch {
                rule_index,
                flag_tokens,
                env_values: if env_triggered { env_values } else { BTreeMap::new() },
            });
        }
    }
    Ok(matches)
}

fn build_assertions(
    rules: &RuleSet,
    matches: &[RuleMatch],
    output: &Path,
) -> Result<Vec<AttributeAssertion>, ProducerError> {
    if matches.is_empty() {
        let Some(baseline) = &rules.baseline_attribute else {
            return Err(ProducerError::NoAttributes);
        };
        return Ok(vec![AttributeAssertion::new(baseline.clone())]);
    }

    let mut assertions = Vec::with_capacity(matches.len());
    for matched in matches {
        let rule = &rules.rules[matched.rule_index];
        let mut assertion = AttributeAssertion::new(rule.attribute.clone());

        if rule.record_conditions {
            let mut body = serde_json::Map::new();
            if !rules.untyped_conditions {
                body.insert("type".to_string(), json!(FLAG_CONDITIONS_TYPE));
            }
            if !matched.flag_tokens.is_empty() {
                body.insert("flags".to_string(), json!(matched.flag_tokens.join(" ")));
            }
            if !matched.env_values.is_empty() {
                body.insert("env".to_string(), json!(matched.env_values));
            }
            assertion.conditions = Some(Conditions::new(body));
        }

        if let Some(template) = &rule.evidence_from {
            let path = PathBuf::from(template.replace("{output}", &output.to_string_lossy()));
            assertion.evidence = Some(describe_file(&path)?);
        }

        assertions.push(assertion);
    }
    Ok(assertions)
}

fn describe_file(path: &Path) -> Result<ResourceDescriptor, ProducerError> {
    let bytes = std::fs::read(path).map_err(|source| ProducerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ResourceDescriptor {
        name: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned()),
        digest: Some(sha256_digest(&bytes)),
        ..Default::default()
    })
}

fn producer_descriptor(rules: &RuleSet) -> Result<ResourceDescriptor, ProducerError> {
    let mut descriptor = rules.producer_descriptor.clone();
    if let Some(binary) = &rules.producer_binary {
        let bytes = std::fs::read(binary).map_err(|source| ProducerError::Io {
            path: binary.clone(),
            source,
        })?;
        descriptor.digest = Some(sha256_digest(&bytes));
    }
    Ok(descriptor)
}
