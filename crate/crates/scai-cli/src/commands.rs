use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use scai_kit::envelope::{
    sign_report, verify_envelope, Envelope, KeyFile, KeyPair, TrustedKey, VerifyError,
};
use scai_kit::graph::{build_graph, verify_graph, FailureReason, GraphError, PolicySelector};
use scai_kit::model::{decode_assertion, decode_report, DecodeMode, DigestSet, ValidationIssue};
use scai_kit::policy::{evaluate, parse_policy, PolicyError, PolicyVerdict, RuleVerdict, TrustPolicy};
use scai_kit::producer::{run_and_attest, ProducerError, RuleSet};
use scai_kit::store::{Resolver, Store};

use crate::failure::{self, read_input, Failure};

pub fn keygen(out: &Path, seed_hex: Option<&str>) -> Result<(), Failure> {
    let keypair = match seed_hex {
        Some(seed) => KeyPair::from_seed_hex(seed)
            .map_err(|e| failure::usage(format!("invalid --seed: {e}")))?,
        None => KeyPair::generate(),
    };
    KeyFile::from_keypair(&keypair, true)
        .save(out)
        .map_err(failure::io)?;
    println!("{}", keypair.key_id());
    Ok(())
}

fn load_keypair(path: &Path) -> Result<KeyPair, Failure> {
    if !path.exists() {
        return Err(failure::usage(format!("{} does not exist", path.display())));
    }
    KeyFile::load(path)
        .and_then(|f| f.keypair())
        .map_err(|e| failure::io(format!("{}: {e}", path.display())))
}

fn load_trusted_keys(paths: &[PathBuf]) -> Result<Vec<TrustedKey>, Failure> {
    let mut keys = Vec::with_capacity(paths.len());
    for path in paths {
        if !path.exists() {
            return Err(failure::usage(format!("{} does not exist", path.display())));
        }
        let key = KeyFile::load(path)
            .and_then(|f| f.trusted_key())
            .map_err(|e| failure::io(format!("{}: {e}", path.display())))?;
        keys.push(key);
    }
    Ok(keys)
}

fn load_envelope(path: &Path) -> Result<Envelope, Failure> {
    let bytes = read_input(path)?;
    Envelope::from_json(&bytes).map_err(|e| failure::io(format!("{}: {e}", path.display())))
}

fn load_policy(path: &Path) -> Result<TrustPolicy, Failure> {
    let bytes = read_input(path)?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_policy(&bytes, base_dir).map_err(|e| failure::io(format!("{}: {e}", path.display())))
}

fn open_store(root: Option<&Path>) -> Result<Option<Store>, Failure> {
    match root {
        Some(root) => Store::open(root).map(Some).map_err(failure::io),
        None => Ok(None),
    }
}

pub fn sign(key: &Path, report: &Path, out: &Path, payload_type: &str) -> Result<(), Failure> {
    let keypair = load_keypair(key)?;
    let bytes = read_input(report)?;
    let decoded = decode_report(&bytes, DecodeMode::Strict).map_err(failure::verification)?;
    let envelope =
        sign_report(&decoded.value, &keypair, payload_type).map_err(failure::verification)?;
    std::fs::write(out, envelope.to_json())
        .map_err(|e| failure::io(format!("writing {}: {e}", out.display())))?;
    eprintln!("signed with key {}", keypair.key_id());
    println!("{}", out.display());
    Ok(())
}

/// Verification errors map to exit 1; only file-level problems are exit 3.
/// The message starts with the stable reason token.
fn verify_failure(err: VerifyError) -> Failure {
    failure::verification(format!("{}: {err}", err.code()))
}

pub fn verify(
    envelope_path: &Path,
    key_paths: &[PathBuf],
    threshold: usize,
    json: bool,
) -> Result<(), Failure> {
    let envelope = load_envelope(envelope_path)?;
    let trusted = load_trusted_keys(key_paths)?;
    if threshold == 0 {
        return Err(failure::usage("--threshold must be at least 1"));
    }
    let verified = verify_envelope(&envelope, &trusted, threshold).map_err(verify_failure)?;
    let subject_digest = verified.report.subject.digest.clone().unwrap_or_default();
    if json {
        print_json(&json!({
            "payloadType": verified.payload_type,
            "signerKeyIds": verified.signer_key_ids,
            "subject": {
                "name": verified.report.subject.name,
                "digest": subject_digest,
            },
        }));
    } else {
        println!("signers: {}", verified.signer_key_ids.join(", "));
        println!("subject digest: {subject_digest}");
    }
    Ok(())
}

pub fn inspect(file: &Path, json: bool) -> Result<(), Failure> {
    let bytes = read_input(file)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| failure::io(format!("{} is not JSON: {e}", file.display())))?;

    let looks_like_envelope = value.get("payload").is_some() && value.get("signatures").is_some();
    if looks_like_envelope {
        let envelope = Envelope::from_json(&bytes)
            .map_err(|e| failure::io(format!("{}: {e}", file.display())))?;
        let payload = envelope
            .payload_bytes()
            .map_err(|e| failure::io(e.to_string()))?;
        let (body, issues) = decode_with_issues(&payload, true);
        if json {
            print_json(&json!({
                "kind": "envelope",
                "payloadType": envelope.payload_type,
                "signatureKeyIds": envelope.signatures.iter().map(|s| s.keyid.clone()).collect::<Vec<_>>(),
                "payload": body,
                "issues": issues,
            }));
        } else {
            println!("envelope ({})", envelope.payload_type);
            println!(
                "signature keyids: {}",
                envelope
                    .signatures
                    .iter()
                    .map(|s| s.keyid.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("payload:");
            println!("{}", pretty(&body));
            print_issues(&issues);
        }
        return Ok(());
    }

    // report first, then a bare assertion
    let (body, issues, kind) = match decode_report(&bytes, DecodeMode::Lax) {
        Ok(decoded) => (
            serde_json::to_value(&decoded.value).unwrap(),
            decoded.warnings,
            "report",
        ),
        Err(scai_kit::model::DecodeError::Invalid(report_issues)) => {
            match decode_assertion(&bytes, DecodeMode::Lax) {
                Ok(decoded) => (
                    serde_json::to_value(&decoded.value).unwrap(),
                    decoded.warnings,
                    "assertion",
                ),
                Err(_) => (value, report_issues, "report"),
            }
        }
        Err(e) => return Err(failure::io(format!("{}: {e}", file.display()))),
    };
    if json {
        print_json(&json!({"kind": kind, "document": body, "issues": issues}));
    } else {
        println!("{kind}:");
        println!("{}", pretty(&body));
        print_issues(&issues);
    }
    Ok(())
}

fn decode_with_issues(bytes: &[u8], lax: bool) -> (serde_json::Value, Vec<ValidationIssue>) {
    let mode = if lax { DecodeMode::Lax } else { DecodeMode::Strict };
    match decode_report(bytes, mode) {
        Ok(decoded) => (
            serde_json::to_value(&decoded.value).unwrap(),
            decoded.warnings,
        ),
        Err(scai_kit::model::DecodeError::Invalid(issues)) => (
            serde_json::from_slice(bytes).unwrap_or(serde_json::Value::Null),
            issues,
        ),
        Err(_) => (serde_json::Value::Null, Vec::new()),
    }
}

fn print_issues(issues: &[ValidationIssue]) {
    for issue in issues {
        eprintln!("  {issue}");
    }
}

pub fn check(
    envelope_path: &Path,
    policy_path: &Path,
    store_root: Option<&Path>,
    json: bool,
) -> Result<(), Failure> {
    let envelope = load_envelope(envelope_path)?;
    let policy = load_policy(policy_path)?;
    let store = open_store(store_root)?;
    let resolver = Resolver::with_default_fetchers(store.as_ref());

    let verified =
        verify_envelope(&envelope, &policy.trusted_keys, policy.threshold).map_err(verify_failure)?;
    let verdict = evaluate(&verified, &policy, &resolver).map_err(policy_failure)?;

    if json {
        print_json(&serde_json::to_value(&verdict).unwrap());
    } else {
        print_verdict_table(&verdict, &policy);
    }
    if verdict.pass {
        Ok(())
    } else {
        Err(failure::verification("policy verdict: fail"))
    }
}

fn policy_failure(err: PolicyError) -> Failure {
    match err {
        PolicyError::EvidenceUnresolvable { .. } => failure::io(err),
        _ => failure::verification(err),
    }
}

fn print_verdict_table(verdict: &PolicyVerdict, policy: &TrustPolicy) {
    println!("{:<5} {:<8} {:<30} {:<9} detail", "rule", "kind", "attribute", "outcome");
    for outcome in &verdict.per_rule {
        let rule = &policy.rules[outcome.rule_index];
        let kind = match rule.kind {
            scai_kit::policy::RuleKind::Require => "require",
            scai_kit::policy::RuleKind::Forbid => "forbid",
        };
        let state = match outcome.outcome {
            RuleVerdict::Satisfied => "ok",
            RuleVerdict::Violated => "violated",
            RuleVerdict::Missing => "missing",
        };
        println!(
            "{:<5} {:<8} {:<30} {:<9} {}",
            outcome.rule_index, kind, rule.attribute_pattern, state, outcome.detail
        );
    }
    if !verdict.unruled_assertion_indices.is_empty() {
        println!(
            "unruled assertions (not judged): {:?}",
            verdict.unruled_assertion_indices
        );
    }
    println!("verdict: {}", if verdict.pass { "pass" } else { "fail" });
}

pub fn graph(
    envelope_path: &Path,
    policy_path: &Path,
    node_policies: &[String],
    max_depth: usize,
    store_root: Option<&Path>,
    json: bool,
) -> Result<(), Failure> {
    let envelope = load_envelope(envelope_path)?;
    let default_policy = load_policy(policy_path)?;
    let mut selectors = Vec::new();
    for entry in node_policies {
        let Some((selector, path)) = entry.split_once('=') else {
            return Err(failure::usage(format!(
                "--node-policy must be SELECTOR=POLICY_FILE, got \"{entry}\""
            )));
        };
        selectors.push(PolicySelector {
            selector: selector.to_string(),
            policy: load_policy(Path::new(path))?,
        });
    }
    if max_depth == 0 {
        return Err(failure::usage("--max-depth must be at least 1"));
    }
    let store = open_store(store_root)?;
    let resolver = Resolver::with_default_fetchers(store.as_ref());

    let graph = build_graph(&envelope, &default_policy.trusted_keys, &resolver, max_depth)
        .map_err(graph_failure)?;
    let verdict = verify_graph(&graph, &selectors, &default_policy, &resolver);

    if json {
        print_json(&json!({
            "pass": verdict.pass,
            "root": graph.root,
            "edges": graph.edges,
            "perNode": verdict.per_node,
            "failures": verdict.failures,
        }));
    } else {
        print_tree(&graph, &verdict);
        println!("verdict: {}", if verdict.pass { "pass" } else { "fail" });
    }

    if verdict.pass {
        Ok(())
    } else if verdict
        .failures
        .iter()
        .any(|f| matches!(f.reason, FailureReason::EvidenceUnresolvable(_)))
    {
        Err(failure::io("graph verification hit unresolvable evidence"))
    } else {
        Err(failure::verification("graph verdict: fail"))
    }
}

fn graph_failure(err: GraphError) -> Failure {
    match &err {
        GraphError::ChildVerificationFailed { unresolvable, .. } if *unresolvable => {
            failure::io(err)
        }
        _ => failure::verification(err),
    }
}

fn print_tree(graph: &scai_kit::graph::DependencyGraph, verdict: &scai_kit::graph::GraphVerdict) {
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for edge in &graph.edges {
        children
            .entry(edge.from.as_str())
            .or_default()
            .push(edge.to.as_str());
    }
    fn label(graph: &scai_kit::graph::DependencyGraph, key: &str) -> String {
        graph
            .nodes
            .get(key)
            .and_then(|n| n.report.subject.name.clone())
            .unwrap_or_else(|| "<unnamed>".to_string())
    }
    fn walk(
        key: &str,
        depth: usize,
        graph: &scai_kit::graph::DependencyGraph,
        verdict: &scai_kit::graph::GraphVerdict,
        children: &BTreeMap<&str, Vec<&str>>,
        seen: &mut Vec<String>,
    ) {
        let status = verdict
            .per_node
            .get(key)
            .map(|v| if v.pass { "pass" } else { "fail" })
            .unwrap_or("error");
        println!(
            "{}{} {} [{status}]",
            "  ".repeat(depth),
            label(graph, key),
            key
        );
        if seen.contains(&key.to_string()) {
            return;
        }
        seen.push(key.to_string());
        if let Some(kids) = children.get(key) {
            for kid in kids {
                walk(kid, depth + 1, graph, verdict, children, seen);
            }
        }
    }
    let mut seen = Vec::new();
    walk(&graph.root, 0, graph, verdict, &children, &mut seen);
    for failure in &verdict.failures {
        println!("failure at {}: {:?}", failure.digest_key, failure.reason);
    }
}

pub fn produce(
    rules_path: &Path,
    key_path: &Path,
    outputs: &[PathBuf],
    envelope_dir: Option<&Path>,
    record_out: Option<&Path>,
    argv: &[String],
) -> Result<(), Failure> {
    let rules_bytes = read_input(rules_path)?;
    let rules = RuleSet::from_json(&rules_bytes)
        .map_err(|e| failure::io(format!("{}: {e}", rules_path.display())))?;
    let keypair = load_keypair(key_path)?;

    let (envelopes, record) =
        run_and_attest(argv, outputs, &rules, &keypair).map_err(produce_failure)?;

    for (output, envelope) in outputs.iter().zip(&envelopes) {
        let path = envelope_output_path(output, envelope_dir);
        std::fs::write(&path, envelope.to_json())
            .map_err(|e| failure::io(format!("writing {}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    if let Some(record_path) = record_out {
        let body = serde_json::to_vec_pretty(&record).expect("record serializes");
        std::fs::write(record_path, body)
            .map_err(|e| failure::io(format!("writing {}: {e}", record_path.display())))?;
    }
    Ok(())
}

fn envelope_output_path(output: &Path, envelope_dir: Option<&Path>) -> PathBuf {
    let file_name = format!(
        "{}.scai.json",
        output
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".to_string())
    );
    match envelope_dir {
        Some(dir) => dir.join(file_name),
        None => output.with_file_name(file_name),
    }
}

fn produce_failure(err: ProducerError) -> Failure {
    match &err {
        ProducerError::CommandFailed { .. } | ProducerError::NoAttributes => {
            failure::verification(err)
        }
        ProducerError::Sign(_) => failure::verification(err),
        _ => failure::io(err),
    }
}

pub fn store_put(store_root: Option<&Path>, file: &Path) -> Result<(), Failure> {
    let store = require_store(store_root)?;
    let bytes = read_input(file)?;
    let digest = store.put(&bytes).map_err(failure::io)?;
    println!("{digest}");
    Ok(())
}

pub fn store_get(
    store_root: Option<&Path>,
    digest_arg: &str,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let store = require_store(store_root)?;
    let digest = parse_digest_arg(digest_arg)?;
    let bytes = store.get(&digest).map_err(|e| match e {
        scai_kit::store::StoreError::NotFound { .. } => failure::io(e),
        other => failure::io(other),
    })?;
    match out {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| failure::io(format!("writing {}: {e}", path.display())))?,
        None => {
            use std::io::Write as _;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| failure::io(e.to_string()))?;
        }
    }
    Ok(())
}

fn require_store(store_root: Option<&Path>) -> Result<Store, Failure> {
    let root = store_root
        .ok_or_else(|| failure::usage("no store configured; pass --store or set SCAI_STORE"))?;
    Store::open(root).map_err(failure::io)
}

fn parse_digest_arg(arg: &str) -> Result<DigestSet, Failure> {
    let (algorithm, value) = match arg.split_once(':') {
        Some((alg, value)) => (alg, value),
        None => ("sha256", arg),
    };
    if algorithm != "sha256" || value.len() != 64 || !value.bytes().all(|b| b.is_ascii_hexdigit())
    {
        return Err(failure::usage(format!(
            "digest must be sha256:<64 hex chars>, got \"{arg}\""
        )));
    }
    Ok(DigestSet::sha256(value.to_lowercase()))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}
