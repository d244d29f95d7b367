//! The transitive dependency graph induced by assertions whose evidence is
//! itself a signed report envelope, and its verification against per-node
//! policies.
//!
//! Edges are recognized by the evidence mediaType, not by attribute name:
//! attribute vocabularies are open, the mediaType is the reliable
//! discriminator.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::envelope::{verify_envelope, Envelope, TrustedKey, VerifiedReport, VerifyError};
use crate::model::{DigestMatch, DigestSet};
use crate::policy::{evaluate, match_glob, PolicyError, PolicyVerdict, TrustPolicy};
use crate::store::{ResolveError, Resolver};

/// Evidence media types treated as nested report envelopes.
pub const REPORT_MEDIA_TYPE_PATTERNS: &[&str] = &["scai/report/*", "application/vnd.scai.*"];

/// Default traversal depth bound.
pub const DEFAULT_MAX_DEPTH: usize = 32;

/// Node identity: `sha256:<hex>` when present, otherwise the
/// lexicographically first algorithm entry.
pub fn digest_key(digest: &DigestSet) -> String {
    if let Some(hex_digest) = digest.get("sha256") {
        return format!("sha256:{hex_digest}");
    }
    digest
        .entries
        .iter()
        .next()
        .map(|(alg, value)| format!("{alg}:{value}"))
        .unwrap_or_else(|| "none".to_string())
}

/// An edge from a report to the dependency report linked by one of its
/// assertions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub assertion_index: usize,
}

/// Verified reports keyed by subject digest, plus the assertion edges that
/// link them. Nodes deduplicate by digest key.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    pub nodes: BTreeMap<String, VerifiedReport>,
    pub edges: Vec<GraphEdge>,
    pub root: String,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("root envelope failed verification: {0}")]
    RootVerificationFailed(#[from] VerifyError),
    /// A node's digest key recurs on the current traversal path.
    #[error("dependency cycle at {digest_key}")]
    CycleDetected { digest_key: String },
    #[error("dependency chain exceeds max depth {max_depth}")]
    DepthExceeded { max_depth: usize },
    /// Resolving or verifying a child envelope failed; names the edge.
    #[error("child verification failed on edge {from} assertion {assertion_index}: {reason}")]
    ChildVerificationFailed {
        from: String,
        assertion_index: usize,
        reason: String,
        /// Present when the failure is resolution infrastructure, not
        /// verification.
        unresolvable: bool,
    },
}

/// Build the dependency graph rooted at an envelope.
///
/// Every assertion whose evidence mediaType matches a report pattern is
/// resolved, verified as an envelope against the same trusted set, added as
/// a node, and recursed into. The root counts as depth 1.
pub fn build_graph(
    root: &Envelope,
    trusted: &[TrustedKey],
    resolver: &Resolver,
    max_depth: usize,
) -> Result<DependencyGraph, GraphError> {
    let verified = verify_envelope(root, trusted, 1)?;
    let root_key = node_key(&verified);
    let mut graph = DependencyGraph {
        nodes: BTreeMap::new(),
        edges: Vec::new(),
        root: root_key.clone(),
    };
    let mut path = Vec::new();
    expand(verified, &mut graph, &mut path, trusted, resolver, 1, max_depth)?;
    Ok(graph)
}

fn node_key(verified: &VerifiedReport) -> String {
    verified
        .report
        .subject
        .digest
        .as_ref()
        .map(digest_key)
        .unwrap_or_else(|| "none".to_string())
}

fn is_report_media_type(media_type: &str) -> bool {
    REPORT_MEDIA_TYPE_PATTERNS
        .iter()
        .any(|pattern| match_glob(pattern, media_type))
}

fn expand(
    verified: VerifiedReport,
    graph: &mut DependencyGraph,
    path: &mut Vec<String>,
    trusted: &[TrustedKey],
    resolver: &Resolver,
    depth: usize,
    max_depth: usize,
) -> Result<String, GraphError> {
    if depth > max_depth {
        return Err(GraphError::DepthExceeded { max_depth });
    }
    let key = node_key(&verified);
    if path.contains(&key) {
        return Err(GraphError::CycleDetected { digest_key: key });
    }
    if graph.nodes.contains_key(&key) {
        // reached again via another path; already expanded
        return Ok(key);
    }
    graph.nodes.insert(key.clone(), verified.clone());
    path.push(key.clone());

    for (assertion_index, assertion) in verified.report.attributes.iter().enumerate() {
        let Some(evidence) = &assertion.evidence else {
            continue;
        };
        let Some(media_type) = evidence.media_type.as_deref() else {
            continue;
        };
        if !is_report_media_type(media_type) {
            continue;
        }

        let fail = |reason: String, unresolvable: bool| GraphError::ChildVerificationFailed {
            from: key.clone(),
            assertion_index,
            reason,
            unresolvable,
        };

        let resolved = resolver.resolve(evidence).map_err(|e| {
            let unresolvable = matches!(e, ResolveError::Unresolvable { .. });
            fail(e.to_string(), unresolvable)
        })?;
        let child_envelope =
            Envelope::from_json(&resolved.bytes).map_err(|e| fail(e.to_string(), false))?;
        let child_verified =
            verify_envelope(&child_envelope, trusted, 1).map_err(|e| fail(e.to_string(), false))?;
        let child_key = expand(
            child_verified,
            graph,
            path,
            trusted,
            resolver,
            depth + 1,
            max_depth,
        )?;
        graph.edges.push(GraphEdge {
            from: key.clone(),
            to: child_key,
            assertion_index,
        });
    }

    path.pop();
    Ok(key)
}

/// Why a node or edge failed graph verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", tag = "kind", content = "detail")]
pub enum FailureReason {
    /// The node's policy verdict did not pass.
    PolicyFailed,
    /// Evidence for a node's policy could not be obtained.
    EvidenceUnresolvable(String),
    /// The node's signers are not trusted by its policy.
    UntrustedSigner,
    /// The child report's subject digest does not match the linking
    /// assertion's target digest.
    TargetSubjectMismatch,
    /// The linking assertion carries no target digest to bind the child to.
    TargetDigestMissing,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphFailure {
    pub digest_key: String,
    pub reason: FailureReason,
}

/// Per-node verdicts plus structural failures. Passes only when every node
/// passes its policy and every edge binds its child.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphVerdict {
    pub pass: bool,
    pub per_node: BTreeMap<String, PolicyVerdict>,
    pub failures: Vec<GraphFailure>,
}

/// Select policies per node by glob over the subject name and uri; the first
/// matching selector wins, else the default policy applies.
pub struct PolicySelector {
    pub selector: String,
    pub policy: TrustPolicy,
}

/// Verify every node of a graph against its selected policy, and check that
/// each edge's child subject digest matches the linking assertion's target
/// digest (a match, not merely no overlap).
pub fn verify_graph(
    graph: &DependencyGraph,
    selectors: &[PolicySelector],
    default_policy: &TrustPolicy,
    resolver: &Resolver,
) -> GraphVerdict {
    let mut per_node = BTreeMap::new();
    let mut failures = Vec::new();

    for (key, node) in &graph.nodes {
        let policy = selectors
            .iter()
            .find(|s| selector_matches(&s.selector, node))
            .map(|s| &s.policy)
            .unwrap_or(default_policy);
        match evaluate(node, policy, resolver) {
            Ok(verdict) => {
                if !verdict.pass {
                    failures.push(GraphFailure {
                        digest_key: key.clone(),
                        reason: FailureReason::PolicyFailed,
                    });
                }
                per_node.insert(key.clone(), verdict);
            }
            Err(PolicyError::EvidenceUnresolvable { detail, .. }) => {
                failures.push(GraphFailure {
                    digest_key: key.clone(),
                    reason: FailureReason::EvidenceUnresolvable(detail),
                });
            }
            Err(PolicyError::SignerNotTrusted) => {
                failures.push(GraphFailure {
                    digest_key: key.clone(),
                    reason: FailureReason::UntrustedSigner,
                });
            }
            Err(other) => {
                failures.push(GraphFailure {
                    digest_key: key.clone(),
                    reason: FailureReason::EvidenceUnresolvable(other.to_string()),
                });
            }
        }
    }

    for edge in &graph.edges {
        let (Some(parent), Some(child)) =
            (graph.nodes.get(&edge.from), graph.nodes.get(&edge.to))
        else {
            continue; // build_graph guarantees endpoints; nothing to check
        };
        let target_digest = parent
            .report
            .attributes
            .get(edge.assertion_index)
            .and_then(|a| a.target.as_ref())
            .and_then(|t| t.digest.as_ref());
        let Some(target_digest) = target_digest else {
            failures.push(GraphFailure {
                digest_key: edge.to.clone(),
                reason: FailureReason::TargetDigestMissing,
            });
            continue;
        };
        let subject_digest = child.report.subject.digest.as_ref();
        let matches = subject_digest
            .map(|d| d.compare(target_digest) == DigestMatch::Match)
            .unwrap_or(false);
        if !matches {
            failures.push(GraphFailure {
                digest_key: edge.to.clone(),
                reason: FailureReason::TargetSubjectMismatch,
            });
        }
    }

    let pass = failures.is_empty() && per_node.values().all(|v| v.pass);
    GraphVerdict {
        pass,
        per_node,
        failures,
    }
}

fn selector_matches(selector: &str, node: &VerifiedReport) -> bool {
    let subject = &node.report.subject;
    subject
        .name
        .as_deref()
        .map(|name| match_glob(selector, name))
        .unwrap_or(false)
        || subject
            .uri
            .as_deref()
            .map(|uri| match_glob(selector, uri))
            .unwrap_or(false)
}
