//! scai-kit: create, sign, store, and verify attribute assertion metadata
//! for software artifacts.
//!
//! The pieces, bottom to top:
//!
//! - [`model`] — domain types (digest sets, resource descriptors, attribute
//!   assertions, reports) and their validating JSON decoder.
//! - [`canon`] — canonical JSON bytes (RFC 8785) and the length-prefixed
//!   pre-authentication encoding signatures cover.
//! - [`envelope`] — ed25519 keys, signing reports into envelopes, verifying
//!   envelopes against trusted keys.
//! - [`store`] — content-addressed object store and digest-verified
//!   resolution of descriptors from inline content, the store, or remote
//!   locations.
//! - [`policy`] — declarative trust policies and their evaluator.
//! - [`graph`] — the transitive dependency graph induced by report-typed
//!   evidence, built and verified recursively.
//! - [`producer`] — the toolchain wrapper that runs a command and emits
//!   signed reports for its outputs.
//!
//! Everything is immutable after construction; operations are pure given
//! their inputs and safe for concurrent use.

pub mod canon;
pub mod envelope;
pub mod graph;
pub mod model;
pub mod policy;
pub mod producer;
pub mod store;

pub use canon::{canonicalize, canonicalize_text, pre_auth_encode, CanonicalBytes};
pub use envelope::{
    sign_report, verify_envelope, Envelope, KeyFile, KeyPair, TrustedKey, VerifiedReport,
};
pub use model::{
    decode_assertion, decode_report, AttributeAssertion, DecodeMode, DigestMatch, DigestSet,
    Report, ResourceDescriptor, ValidationIssue,
};
pub use policy::{evaluate, match_glob, parse_policy, PolicyVerdict, TrustPolicy};
pub use store::{Resolver, Store};
