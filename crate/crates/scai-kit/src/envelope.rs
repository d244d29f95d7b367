//! Key generation, signing a report into a distributable envelope, and
//! verifying envelopes against a trusted-key set.
//!
//! The signature covers the pre-authentication encoding of the payload type
//! and the canonical report bytes, so the payload carries exactly the
//! subject, attributes, and producer fields and nothing else.

use std::fmt;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::canon::{canonicalize, pre_auth_encode, CanonicalBytes};
use crate::model::{validate_report, DecodeMode, Report, ValidationIssue};

/// Fixed envelope-format identifier written into envelope files.
pub const ENVELOPE_TYPE: &str = "https://github.com/secure-systems-lab/dsse";

/// Payload type written by this toolkit.
pub const PAYLOAD_TYPE: &str = "scai/report/v0.2";

/// Older payload type still accepted by decoders.
pub const PAYLOAD_TYPE_V01: &str = "scai/report/v0.1";

const SEED_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("seed must be exactly {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("key material is not valid base64")]
    BadEncoding,
    #[error("public key bytes are not a valid ed25519 key")]
    BadKeyBytes,
    #[error("unsupported signature scheme \"{0}\"")]
    UnsupportedScheme(String),
    #[error("key file has no private key")]
    NoPrivateKey,
    #[error("malformed key file: {0}")]
    MalformedKeyFile(String),
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        source: std::io::Error,
    },
}

/// An ed25519 keypair. The key id is the lowercase hex sha256 of the raw
/// public key bytes and recomputes from them.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    key_id: String,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // never expose seed material through Debug
        f.debug_struct("KeyPair").field("key_id", &self.key_id).finish()
    }
}

/// A public key accepted for verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustedKey {
    verifying: VerifyingKey,
    key_id: String,
}

fn key_id_of(public: &VerifyingKey) -> String {
    hex::encode(Sha256::digest(public.as_bytes()))
}

impl KeyPair {
    /// Generate from fresh OS randomness.
    pub fn generate() -> KeyPair {
        let mut seed = [0u8; SEED_LEN];
        rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut seed);
        Self::from_seed_bytes(seed)
    }

    /// Deterministic keypair from a 32-byte seed.
    pub fn from_seed(seed: &[u8]) -> Result<KeyPair, KeyError> {
        let seed: [u8; SEED_LEN] = seed
            .try_into()
            .map_err(|_| KeyError::BadSeedLength(seed.len()))?;
        Ok(Self::from_seed_bytes(seed))
    }

    pub fn from_seed_hex(seed_hex: &str) -> Result<KeyPair, KeyError> {
        let bytes = hex::decode(seed_hex).map_err(|_| KeyError::BadEncoding)?;
        Self::from_seed(&bytes)
    }

    fn from_seed_bytes(seed: [u8; SEED_LEN]) -> KeyPair {
        let signing = SigningKey::from_bytes(&seed);
        let key_id = key_id_of(&signing.verifying_key());
        KeyPair { signing, key_id }
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn public_key_bytes(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn trusted_key(&self) -> TrustedKey {
        TrustedKey {
            verifying: self.signing.verifying_key(),
            key_id: self.key_id.clone(),
        }
    }

    fn sign(&self, message: &[u8]) -> Signature {
        self.signing.sign(message)
    }
}

impl TrustedKey {
    pub fn from_public_bytes(bytes: &[u8]) -> Result<TrustedKey, KeyError> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| KeyError::BadKeyBytes)?;
        let verifying = VerifyingKey::from_bytes(&arr).map_err(|_| KeyError::BadKeyBytes)?;
        let key_id = key_id_of(&verifying);
        Ok(TrustedKey { verifying, key_id })
    }

    pub fn from_public_base64(encoded: &str) -> Result<TrustedKey, KeyError> {
        let bytes = BASE64
            .decode(encoded.as_bytes())
            .map_err(|_| KeyError::BadEncoding)?;
        Self::from_public_bytes(&bytes)
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }
}

/// On-disk key file: `{scheme, keyid, public, private?}` with base64 raw key
/// bytes. Private key files are written with owner-only permissions.
#[derive(Debug, Serialize, Deserialize)]
pub struct KeyFile {
    pub scheme: String,
    pub keyid: String,
    pub public: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private: Option<String>,
}

impl KeyFile {
    pub fn from_keypair(keypair: &KeyPair, include_private: bool) -> KeyFile {
        KeyFile {
            scheme: "ed25519".to_string(),
            keyid: keypair.key_id().to_string(),
            public: BASE64.encode(keypair.public_key_bytes()),
            private: include_private.then(|| BASE64.encode(keypair.signing.to_bytes())),
        }
    }

    pub fn load(path: &Path) -> Result<KeyFile, KeyError> {
        let bytes = std::fs::read(path).map_err(|source| KeyError::Io {
            action: "read",
            path: path.display().to_string(),
            source,
        })?;
        let file: KeyFile = serde_json::from_slice(&bytes)
            .map_err(|e| KeyError::MalformedKeyFile(e.to_string()))?;
        if file.scheme != "ed25519" {
            return Err(KeyError::UnsupportedScheme(file.scheme));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), KeyError> {
        let json = serde_json::to_vec_pretty(self).expect("key file serializes");
        std::fs::write(path, json).map_err(|source| KeyError::Io {
            action: "write",
            path: path.display().to_string(),
            source,
        })?;
        #[cfg(unix)]
        if self.private.is_some() {
            use std::os::unix::fs::PermissionsExt;
            let perms = std::fs::Permissions::from_mode(0o600);
            std::fs::set_permissions(path, perms).map_err(|source| KeyError::Io {
                action: "restrict",
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }

    /// The verification half. The keyid is recomputed from the public bytes,
    /// never trusted from the file.
    pub fn trusted_key(&self) -> Result<TrustedKey, KeyError> {
        TrustedKey::from_public_base64(&self.public)
    }

    pub fn keypair(&self) -> Result<KeyPair, KeyError> {
        let encoded = self.private.as_ref().ok_or(KeyError::NoPrivateKey)?;
        let seed = BASE64
            .decode(encoded.as_bytes())
            .map_err(|_| KeyError::BadEncoding)?;
        let pair = KeyPair::from_seed(&seed)?;
        // a tampered file could pair a private key with someone else's public half
        let declared = self.trusted_key()?;
        if declared.key_id != pair.key_id {
            return Err(KeyError::MalformedKeyFile(
                "public key does not belong to the private key".to_string(),
            ));
        }
        Ok(pair)
    }
}

/// One detached signature inside an envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeSignature {
    pub keyid: String,
    pub sig: String,
}

fn default_envelope_type() -> String {
    ENVELOPE_TYPE.to_string()
}

/// The distributable unit: payload type, base64 canonical report bytes, and
/// one or more signatures over their pre-authentication encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    /// Self-describing format identifier; optional on input, always written.
    #[serde(rename = "type", default = "default_envelope_type")]
    pub envelope_type: String,
    #[serde(rename = "payloadType")]
    pub payload_type: String,
    pub payload: String,
    pub signatures: Vec<EnvelopeSignature>,
}

impl Envelope {
    pub fn from_json(bytes: &[u8]) -> Result<Envelope, VerifyError> {
        let envelope: Envelope = serde_json::from_slice(bytes)
            .map_err(|e| VerifyError::MalformedEnvelope(e.to_string()))?;
        if envelope.envelope_type != ENVELOPE_TYPE {
            return Err(VerifyError::UnsupportedEnvelopeType(envelope.envelope_type));
        }
        if envelope.signatures.is_empty() {
            return Err(VerifyError::MalformedEnvelope(
                "signatures must be non-empty".to_string(),
            ));
        }
        Ok(envelope)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("envelope serializes");
        out.push(b'\n');
        out
    }

    pub fn payload_bytes(&self) -> Result<Vec<u8>, VerifyError> {
        BASE64
            .decode(self.payload.as_bytes())
            .map_err(|_| VerifyError::MalformedEnvelope("payload is not base64".to_string()))
    }
}

/// A report whose envelope verified against the trusted key set.
#[derive(Debug, Clone)]
pub struct VerifiedReport {
    pub report: Report,
    /// Key ids of the trusted keys whose signatures verified, sorted.
    pub signer_key_ids: Vec<String>,
    /// The exact payload bytes the signatures cover.
    pub payload: CanonicalBytes,
    pub payload_type: String,
}

#[derive(Debug, Error)]
pub enum SignError {
    /// The report failed strict validation; carries the issue list.
    #[error("report fails strict validation: {}", format_issues(.0))]
    StrictValidationFailed(Vec<ValidationIssue>),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl VerifyError {
    /// Stable machine-readable reason token.
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::MalformedEnvelope(_) => "MalformedEnvelope",
            VerifyError::UnsupportedEnvelopeType(_) => "UnsupportedEnvelopeType",
            VerifyError::UnsupportedPayloadType(_) => "UnsupportedPayloadType",
            VerifyError::SignatureInvalid { .. } => "SignatureInvalid",
            VerifyError::UntrustedSigner => "UntrustedSigner",
            VerifyError::ThresholdNotMet { .. } => "ThresholdNotMet",
            VerifyError::PayloadInvalid(_) => "PayloadInvalid",
            VerifyError::BadThreshold => "BadThreshold",
            VerifyError::NoTrustedKeys => "NoTrustedKeys",
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("unsupported envelope type \"{0}\"")]
    UnsupportedEnvelopeType(String),
    #[error("unsupported payload type \"{0}\"")]
    UnsupportedPayloadType(String),
    /// A signature names a trusted key but fails cryptographically. Hard
    /// error, never skipped.
    #[error("signature by trusted key {key_id} is invalid")]
    SignatureInvalid { key_id: String },
    #[error("no signature matches any trusted key")]
    UntrustedSigner,
    #[error("{verified} trusted signature(s), threshold is {threshold}")]
    ThresholdNotMet { verified: usize, threshold: usize },
    #[error("payload is not a valid report: {0}")]
    PayloadInvalid(String),
    #[error("threshold must be at least 1")]
    BadThreshold,
    #[error("trusted key set must be non-empty")]
    NoTrustedKeys,
}

/// Sign a report into an envelope. The report must pass strict validation;
/// the payload is exactly its canonical bytes.
pub fn sign_report(
    report: &Report,
    signer: &KeyPair,
    payload_type: &str,
) -> Result<Envelope, SignError> {
    sign_report_with_mode(report, signer, payload_type, DecodeMode::Strict)
}

/// Signing entry point for callers that deliberately emit the lax, example-
/// style layout (conditions without a type discriminator).
pub fn sign_report_with_mode(
    report: &Report,
    signer: &KeyPair,
    payload_type: &str,
    mode: DecodeMode,
) -> Result<Envelope, SignError> {
    let issues = validate_report(report, mode);
    if issues.iter().any(ValidationIssue::is_error) {
        return Err(SignError::StrictValidationFailed(issues));
    }
    let payload = canonicalize(&report.to_json_value());
    let pae = pre_auth_encode(payload_type, &payload);
    let signature = signer.sign(&pae);
    Ok(Envelope {
        envelope_type: ENVELOPE_TYPE.to_string(),
        payload_type: payload_type.to_string(),
        payload: BASE64.encode(payload.as_bytes()),
        signatures: vec![EnvelopeSignature {
            keyid: signer.key_id().to_string(),
            sig: BASE64.encode(signature.to_bytes()),
        }],
    })
}

/// Verify an envelope against a trusted key set.
///
/// Signatures whose keyid matches no trusted key are skipped; a keyid that
/// matches but fails cryptographically is a hard error (no downgrade by
/// garbage signatures). At least `threshold` distinct trusted keys must
/// verify, and the payload must decode (lax) into a valid report.
pub fn verify_envelope(
    envelope: &Envelope,
    trusted: &[TrustedKey],
    threshold: usize,
) -> Result<VerifiedReport, VerifyError> {
    if threshold == 0 {
        return Err(VerifyError::BadThreshold);
    }
    if trusted.is_empty() {
        return Err(VerifyError::NoTrustedKeys);
    }
    if envelope.envelope_type != ENVELOPE_TYPE {
        return Err(VerifyError::UnsupportedEnvelopeType(
            envelope.envelope_type.clone(),
        ));
    }
    if envelope.payload_type != PAYLOAD_TYPE && envelope.payload_type != PAYLOAD_TYPE_V01 {
        return Err(VerifyError::UnsupportedPayloadType(
            envelope.payload_type.clone(),
        ));
    }

    let payload = envelope.payload_bytes()?;
    let pae = pre_auth_encode(&envelope.payload_type, &payload);

    let mut verified_ids: Vec<String> = Vec::new();
    for entry in &envelope.signatures {
        let Some(key) = trusted.iter().find(|k| k.key_id == entry.keyid) else {
            continue;
        };
        let raw = BASE64
            .decode(entry.sig.as_bytes())
            .map_err(|_| VerifyError::SignatureInvalid {
                key_id: entry.keyid.clone(),
            })?;
        let signature =
            Signature::from_slice(&raw).map_err(|_| VerifyError::SignatureInvalid {
                key_id: entry.keyid.clone(),
            })?;
        key.verifying
            .verify(&pae, &signature)
            .map_err(|_| VerifyError::SignatureInvalid {
                key_id: entry.keyid.clone(),
            })?;
        if !verified_ids.contains(&entry.keyid) {
            verified_ids.push(entry.keyid.clone());
        }
    }

    if verified_ids.is_empty() {
        return Err(VerifyError::UntrustedSigner);
    }
    if verified_ids.len() < threshold {
        return Err(VerifyError::ThresholdNotMet {
            verified: verified_ids.len(),
            threshold,
        });
    }
    verified_ids.sort();

    // the envelope contract says the payload is canonical report bytes;
    // enforce the fixed point so signatures stay unique per report
    let canonical = crate::canon::canonicalize_text(&payload)
        .map_err(|e| VerifyError::PayloadInvalid(e.to_string()))?;
    if canonical.as_bytes() != payload.as_slice() {
        return Err(VerifyError::PayloadInvalid(
            "payload is not in canonical form".to_string(),
        ));
    }
    let decoded = crate::model::decode_report(&payload, DecodeMode::Lax)
        .map_err(|e| VerifyError::PayloadInvalid(e.to_string()))?;

    Ok(VerifiedReport {
        report: decoded.value,
        signer_key_ids: verified_ids,
        payload: canonical,
        payload_type: envelope.payload_type.clone(),
    })
}
