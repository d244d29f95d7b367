//! Content-addressed local object store and digest-verified resolution of
//! resource descriptors from inline content, the store, or remote locations.
//!
//! Layout is `objects/<algorithm>/<first2hex>/<fullhex>`; the filesystem is
//! the index. Writers go through a temp file and an atomic rename, so a
//! crashed put never leaves a readable partial object.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest as _, Sha256, Sha512};
use thiserror::Error;

use crate::model::{DigestMatch, DigestSet, ResourceDescriptor};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("no object for digest {digest}")]
    NotFound { digest: String },
    /// Stored bytes no longer hash to the digest they are filed under.
    #[error("stored object {path} is corrupt: {algorithm} digest mismatch")]
    CorruptObject { path: String, algorithm: String },
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("descriptor has no content, digest, or location to resolve from")]
    NothingToResolve,
    #[error("all sources exhausted resolving {descriptor}: {tried}")]
    Unresolvable { descriptor: String, tried: String },
    /// Bytes were obtained but conflict with the descriptor digest. Never
    /// downgraded to success.
    #[error("integrity mismatch from {origin}: {detail}")]
    IntegrityMismatch { origin: &'static str, detail: String },
    /// The descriptor declares only algorithms this build cannot compute.
    #[error("descriptor digest has no computable algorithm (declared: {declared})")]
    NoOverlapDigest { declared: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Compute the digest set this build can produce for a byte sequence.
pub fn compute_digests(bytes: &[u8]) -> DigestSet {
    let mut entries = std::collections::BTreeMap::new();
    entries.insert("sha256".to_string(), hex::encode(Sha256::digest(bytes)));
    entries.insert("sha512".to_string(), hex::encode(Sha512::digest(bytes)));
    DigestSet { entries }
}

/// sha256 digest set of a byte sequence, the identity `put` returns.
pub fn sha256_digest(bytes: &[u8]) -> DigestSet {
    DigestSet::sha256(hex::encode(Sha256::digest(bytes)))
}

/// Content-addressed store rooted at a directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(root.join("objects")).map_err(|source| StoreError::Io {
            action: "create",
            path: root.display().to_string(),
            source,
        })?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, algorithm: &str, hex_digest: &str) -> Option<PathBuf> {
        if hex_digest.len() < 3 {
            return None;
        }
        Some(
            self.root
                .join("objects")
                .join(algorithm)
                .join(&hex_digest[..2])
                .join(hex_digest),
        )
    }

    /// Store bytes, keyed by their sha256 digest. Idempotent: the same bytes
    /// land on the same path and the second write is a no-op.
    pub fn put(&self, bytes: &[u8]) -> Result<DigestSet, StoreError> {
        let digest = sha256_digest(bytes);
        let hex_digest = digest.get("sha256").expect("sha256 always computed");
        let path = self
            .object_path("sha256", hex_digest)
            .expect("sha256 digests are long enough");
        if path.exists() {
            return Ok(digest);
        }
        let dir = path.parent().expect("object path has a parent");
        std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
            action: "create",
            path: dir.display().to_string(),
            source,
        })?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|source| StoreError::Io {
            action: "create temp file in",
            path: dir.display().to_string(),
            source,
        })?;
        tmp.write_all(bytes).map_err(|source| StoreError::Io {
            action: "write",
            path: tmp.path().display().to_string(),
            source,
        })?;
        tmp.persist(&path).map_err(|e| StoreError::Io {
            action: "persist",
            path: path.display().to_string(),
            source: e.error,
        })?;
        Ok(digest)
    }

    /// Retrieve bytes by digest. The read is verified: the bytes must
    /// re-hash to every computable algorithm in the request.
    pub fn get(&self, digest: &DigestSet) -> Result<Vec<u8>, StoreError> {
        let Some(hex_digest) = digest.get("sha256") else {
            // only sha256 paths are written, so nothing else is findable
            return Err(StoreError::NotFound {
                digest: digest.to_string(),
            });
        };
        let path = self
            .object_path("sha256", hex_digest)
            .ok_or_else(|| StoreError::NotFound {
                digest: digest.to_string(),
            })?;
        if !path.exists() {
            return Err(StoreError::NotFound {
                digest: digest.to_string(),
            });
        }
        let bytes = std::fs::read(&path).map_err(|source| StoreError::Io {
            action: "read",
            path: path.display().to_string(),
            source,
        })?;
        let actual = compute_digests(&bytes);
        for (algorithm, expected) in &digest.entries {
            if let Some(got) = actual.get(algorithm) {
                if got != expected {
                    return Err(StoreError::CorruptObject {
                        path: path.display().to_string(),
                        algorithm: algorithm.clone(),
                    });
                }
            }
        }
        Ok(bytes)
    }

    pub fn contains(&self, digest: &DigestSet) -> bool {
        digest
            .get("sha256")
            .and_then(|h| self.object_path("sha256", h))
            .map(|p| p.exists())
            .unwrap_or(false)
    }
}

/// Where a resolved object came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Inline,
    Store,
    Remote,
}

/// Bytes obtained for a descriptor, with the algorithms that verified.
/// `verified_algorithms` is empty only when the descriptor had no digest.
#[derive(Debug, Clone)]
pub struct ResolvedObject {
    pub bytes: Vec<u8>,
    pub source: Source,
    pub verified_algorithms: Vec<String>,
}

/// A fetch backend for one or more URI schemes.
pub trait Fetcher {
    fn supports(&self, scheme: &str) -> bool;
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, String>;
}

/// Reads `file://` URIs.
pub struct FileFetcher;

impl Fetcher for FileFetcher {
    fn supports(&self, scheme: &str) -> bool {
        scheme == "file"
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        let url = url::Url::parse(uri).map_err(|e| e.to_string())?;
        let path = url
            .to_file_path()
            .map_err(|_| format!("{uri} is not a file path"))?;
        std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Fetches `http://` and `https://` URIs. 30 second timeout, at most five
/// redirects.
pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl Default for HttpFetcher {
    fn default() -> Self {
        HttpFetcher {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .redirects(5)
                .build(),
        }
    }
}

impl Fetcher for HttpFetcher {
    fn supports(&self, scheme: &str) -> bool {
        scheme == "http" || scheme == "https"
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        let response = self.agent.get(uri).call().map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        use std::io::Read as _;
        response
            .into_reader()
            .take(64 * 1024 * 1024)
            .read_to_end(&mut bytes)
            .map_err(|e| e.to_string())?;
        Ok(bytes)
    }
}

/// In-memory fetcher keyed by exact URI. The test backend.
#[derive(Debug, Default, Clone)]
pub struct MemoryFetcher {
    objects: HashMap<String, Vec<u8>>,
}

impl MemoryFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, uri: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.objects.insert(uri.into(), bytes.into());
    }
}

impl Fetcher for MemoryFetcher {
    fn supports(&self, _scheme: &str) -> bool {
        true
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, String> {
        self.objects
            .get(uri)
            .cloned()
            .ok_or_else(|| format!("{uri} not present"))
    }
}

/// Resolves descriptors: inline content first, then the local store by
/// digest, then downloadLocation, then uri. The first source that yields
/// bytes decides the outcome — obtained bytes that fail the digest check are
/// an error, not a reason to try the next source.
pub struct Resolver<'a> {
    store: Option<&'a Store>,
    fetchers: Vec<Box<dyn Fetcher + 'a>>,
}

impl<'a> Resolver<'a> {
    pub fn new(store: Option<&'a Store>) -> Self {
        Resolver {
            store,
            fetchers: Vec::new(),
        }
    }

    /// The default backend set: file:// and http(s)://.
    pub fn with_default_fetchers(store: Option<&'a Store>) -> Self {
        Resolver::new(store)
            .fetcher(FileFetcher)
            .fetcher(HttpFetcher::default())
    }

    pub fn fetcher(mut self, fetcher: impl Fetcher + 'a) -> Self {
        self.fetchers.push(Box::new(fetcher));
        self
    }

    pub fn resolve(&self, descriptor: &ResourceDescriptor) -> Result<ResolvedObject, ResolveError> {
        let has_location = descriptor.download_location.is_some() || descriptor.uri.is_some();
        if descriptor.content.is_none() && descriptor.digest.is_none() && !has_location {
            return Err(ResolveError::NothingToResolve);
        }

        let mut tried: Vec<String> = Vec::new();

        if let Some(content) = &descriptor.content {
            let verified = self.check_integrity(content, descriptor, "inline content")?;
            return Ok(ResolvedObject {
                bytes: content.clone(),
                source: Source::Inline,
                verified_algorithms: verified,
            });
        }

        if let (Some(store), Some(digest)) = (self.store, descriptor.digest.as_ref()) {
            match store.get(digest) {
                Ok(bytes) => {
                    let verified = self.check_integrity(&bytes, descriptor, "store")?;
                    return Ok(ResolvedObject {
                        bytes,
                        source: Source::Store,
                        verified_algorithms: verified,
                    });
                }
                Err(StoreError::NotFound { .. }) => {
                    tried.push("store: not found".to_string());
                }
                // local corruption is a hard failure, not a fall-through
                Err(err @ StoreError::CorruptObject { .. }) => {
                    return Err(ResolveError::IntegrityMismatch {
                        origin: "store",
                        detail: err.to_string(),
                    });
                }
                Err(other) => return Err(other.into()),
            }
        }

        for location in [
            descriptor.download_location.as_deref(),
            descriptor.uri.as_deref(),
        ]
        .into_iter()
        .flatten()
        {
            match self.fetch_one(location) {
                Ok(bytes) => {
                    let verified = self.check_integrity(&bytes, descriptor, "remote")?;
                    if let Some(store) = self.store {
                        // cache fetched objects; failure to cache is not a
                        // resolution failure
                        let _ = store.put(&bytes);
                    }
                    return Ok(ResolvedObject {
                        bytes,
                        source: Source::Remote,
                        verified_algorithms: verified,
                    });
                }
                Err(detail) => tried.push(format!("{location}: {detail}")),
            }
        }

        Err(ResolveError::Unresolvable {
            descriptor: describe(descriptor),
            tried: if tried.is_empty() {
                "no usable source".to_string()
            } else {
                tried.join("; ")
            },
        })
    }

    fn fetch_one(&self, uri: &str) -> Result<Vec<u8>, String> {
        let scheme = url::Url::parse(uri)
            .map(|u| u.scheme().to_string())
            .map_err(|e| e.to_string())?;
        let fetcher = self
            .fetchers
            .iter()
            .find(|f| f.supports(&scheme))
            .ok_or_else(|| format!("no fetcher for scheme {scheme}"))?;
        fetcher.fetch(uri)
    }

    /// Obtained bytes must digest-match the descriptor when it declares a
    /// digest. Returns the algorithms that verified.
    fn check_integrity(
        &self,
        bytes: &[u8],
        descriptor: &ResourceDescriptor,
        origin: &'static str,
    ) -> Result<Vec<String>, ResolveError> {
        let Some(declared) = descriptor.digest.as_ref() else {
            return Ok(Vec::new());
        };
        let actual = compute_digests(bytes);
        match actual.compare(declared) {
            DigestMatch::Match => Ok(declared
                .entries
                .keys()
                .filter(|alg| actual.get(alg).is_some())
                .cloned()
                .collect()),
            DigestMatch::NoOverlap => Err(ResolveError::NoOverlapDigest {
                declared: declared.to_string(),
            }),
            DigestMatch::Mismatch => Err(ResolveError::IntegrityMismatch {
                origin,
                detail: format!("bytes hash to {actual}, descriptor declares {declared}"),
            }),
        }
    }
}

fn describe(descriptor: &ResourceDescriptor) -> String {
    descriptor
        .name
        .clone()
        .or_else(|| descriptor.uri.clone())
        .or_else(|| descriptor.digest.as_ref().map(ToString::to_string))
        .unwrap_or_else(|| "<unnamed>".to_string())
}
