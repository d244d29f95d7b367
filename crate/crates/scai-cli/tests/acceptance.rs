//! Acceptance suite. Each criterion prints one pass/fail line; run with
//! `cargo test --test acceptance -- --test-threads=1 --nocapture` for the
//! cleanest output.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use scai_kit::canon::{canonicalize, canonicalize_text};
use scai_kit::envelope::{
    sign_report, verify_envelope, Envelope, EnvelopeSignature, KeyPair, PAYLOAD_TYPE,
};
use scai_kit::graph::{build_graph, digest_key, verify_graph, GraphError, DEFAULT_MAX_DEPTH};
use scai_kit::model::{
    decode_assertion, decode_descriptor, decode_report, AttributeAssertion, Conditions,
    DecodeMode, DigestMatch, DigestSet, Report, ResourceDescriptor,
};
use scai_kit::policy::{match_glob, TrustPolicy};
use scai_kit::store::{sha256_digest, MemoryFetcher, Resolver, Store};

fn criterion<F: FnOnce() + std::panic::UnwindSafe>(number: u32, description: &str, body: F) {
    let started = Instant::now();
    let result = std::panic::catch_unwind(body);
    let elapsed = started.elapsed();
    match result {
        Ok(()) => println!("[PASS] criterion {number}: {description} ({elapsed:.2?})"),
        Err(payload) => {
            println!("[FAIL] criterion {number}: {description} ({elapsed:.2?})");
            std::panic::resume_unwind(payload);
        }
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../scai-kit/tests/fixtures")
}

fn corpus(name: &str) -> Vec<u8> {
    let path = fixtures_dir().join("corpus").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn criterion_1_example_corpus_decodes_lax_clean() {
    criterion(1, "example corpus decodes lax with zero errors", || {
        let started = Instant::now();

        for name in [
            "report-endorsement.json",
            "report-reproducible-build.json",
            "report-compilation-legacy.json",
            "report-dependency.json",
        ] {
            let decoded = decode_report(&corpus(name), DecodeMode::Lax)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(decoded.warnings.iter().all(|w| !w.is_error()), "{name}");
        }
        for name in [
            "assertion-compiler-flags.json",
            "assertion-flags-endorsement.json",
            "assertion-attested-hardware.json",
        ] {
            decode_assertion(&corpus(name), DecodeMode::Lax)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for name in ["rd-source-file.json", "rd-software-package.json"] {
            decode_descriptor(&corpus(name), DecodeMode::Lax)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }

        // legacy members upgrade with the exact field mapping
        let legacy = decode_report(&corpus("report-compilation-legacy.json"), DecodeMode::Lax)
            .unwrap()
            .value;
        assert_eq!(
            legacy.subject.uri.as_deref(),
            Some("http://example.com/binaries/hello-world")
        );
        let evidence = legacy.attributes[0].evidence.as_ref().unwrap();
        assert_eq!(
            evidence.uri.as_deref(),
            Some("http://example.com/scai-reports/")
        );
        assert_eq!(evidence.media_type.as_deref(), Some("scai/report/v0.1"));
        assert_eq!(evidence.name.as_deref(), Some("gcc9.3.0-endorsement"));

        assert!(
            started.elapsed() < Duration::from_secs(1),
            "corpus decode exceeded 1s"
        );
    });
}

fn random_hex_digest(rng: &mut StdRng) -> String {
    let bytes: [u8; 32] = rng.gen();
    hex::encode(bytes)
}

fn random_descriptor(rng: &mut StdRng) -> ResourceDescriptor {
    ResourceDescriptor {
        name: rng
            .gen_bool(0.7)
            .then(|| format!("artifact-{}", rng.gen::<u16>())),
        uri: rng
            .gen_bool(0.4)
            .then(|| format!("http://example.com/objects/{}", rng.gen::<u32>())),
        digest: Some(DigestSet::sha256(random_hex_digest(rng))),
        download_location: None,
        media_type: rng.gen_bool(0.3).then(|| "application/json".to_string()),
        content: None,
    }
}

fn random_report(rng: &mut StdRng) -> Report {
    let attribute_names = [
        "WITH_STACK_PROTECTION",
        "ATTESTED_HARDWARE",
        "REPRODUCIBLE",
        "SLSA_PROVENANCE",
        "ENDORSED",
    ];
    let count = rng.gen_range(1..=3);
    let attributes = (0..count)
        .map(|_| {
            let mut assertion = AttributeAssertion::new(
                attribute_names[rng.gen_range(0..attribute_names.len())],
            );
            if rng.gen_bool(0.7) {
                let mut body = serde_json::Map::new();
                body.insert(
                    "type".to_string(),
                    serde_json::json!("scai-kit/flag-conditions/v1"),
                );
                body.insert(
                    "flags".to_string(),
                    serde_json::json!(format!("-f{}", rng.gen::<u16>())),
                );
                assertion.conditions = Some(Conditions::new(body));
            }
            if rng.gen_bool(0.3) {
                assertion.target = Some(random_descriptor(rng));
            }
            if rng.gen_bool(0.3) {
                assertion.evidence = Some(random_descriptor(rng));
            }
            assertion
        })
        .collect();
    Report {
        subject: random_descriptor(rng),
        attributes,
        producer: rng.gen_bool(0.5).then(|| random_descriptor(rng)),
    }
}

#[test]
fn criterion_2_roundtrip_1000_reports() {
    criterion(2, "1000 randomized reports round-trip and sign-verify", || {
        let started = Instant::now();
        let mut rng = StdRng::seed_from_u64(0x5ca1_0001);
        let pair = KeyPair::from_seed(&[0x51u8; 32]).unwrap();
        let trusted = [pair.trusted_key()];

        for i in 0..1000 {
            let report = random_report(&mut rng);

            let encoded = serde_json::to_vec(&report).unwrap();
            let decoded = decode_report(&encoded, DecodeMode::Strict)
                .unwrap_or_else(|e| panic!("report {i}: {e}"));
            assert_eq!(decoded.value, report, "report {i} decode(encode) identity");

            let envelope = sign_report(&report, &pair, PAYLOAD_TYPE).unwrap();
            let verified = verify_envelope(&envelope, &trusted, 1).unwrap();
            assert_eq!(verified.report, report, "report {i} sign-verify identity");

            let again = sign_report(&report, &pair, PAYLOAD_TYPE).unwrap();
            assert_eq!(
                envelope.to_json(),
                again.to_json(),
                "report {i} byte-identical envelopes"
            );
        }

        assert!(
            started.elapsed() < Duration::from_secs(10),
            "round-trip exceeded 10s: {:?}",
            started.elapsed()
        );
    });
}

#[test]
fn criterion_3_tamper_detection_500_trials() {
    criterion(3, "500 random bit flips all break verification", || {
        use base64::engine::general_purpose::STANDARD;
        use base64::Engine as _;

        let mut rng = StdRng::seed_from_u64(0x5ca1_0003);
        let pair = KeyPair::from_seed(&[0x52u8; 32]).unwrap();
        let trusted = [pair.trusted_key()];
        let mut failures_detected = 0usize;
        let total = 500usize;

        for trial in 0..total {
            let report = random_report(&mut rng);
            let envelope = sign_report(&report, &pair, PAYLOAD_TYPE).unwrap();
            let tampered = if trial % 2 == 0 {
                let mut payload = envelope.payload_bytes().unwrap();
                let bit = rng.gen_range(0..payload.len() * 8);
                payload[bit / 8] ^= 1 << (bit % 8);
                Envelope {
                    payload: STANDARD.encode(&payload),
                    ..envelope
                }
            } else {
                let mut signatures = envelope.signatures.clone();
                let mut sig = STANDARD.decode(signatures[0].sig.as_bytes()).unwrap();
                let bit = rng.gen_range(0..sig.len() * 8);
                sig[bit / 8] ^= 1 << (bit % 8);
                signatures[0] = EnvelopeSignature {
                    keyid: signatures[0].keyid.clone(),
                    sig: STANDARD.encode(&sig),
                };
                Envelope {
                    signatures,
                    ..envelope
                }
            };
            if verify_envelope(&tampered, &trusted, 1).is_err() {
                failures_detected += 1;
            }
        }
        assert_eq!(
            failures_detected, total,
            "every single-bit tamper must be detected"
        );
    });
}

#[test]
fn criterion_4_digest_match_truth_table() {
    criterion(4, "digest matching agrees with brute-force oracle", || {
        // per-algorithm state on each side: absent, value A, or value B
        #[derive(Clone, Copy)]
        enum State {
            Absent,
            A,
            B,
        }
        const STATES: [State; 3] = [State::Absent, State::A, State::B];

        fn build(sha256: State, sha512: State) -> DigestSet {
            let mut entries = std::collections::BTreeMap::new();
            match sha256 {
                State::Absent => {}
                State::A => {
                    entries.insert("sha256".into(), "aa".into());
                }
                State::B => {
                    entries.insert("sha256".into(), "bb".into());
                }
            }
            match sha512 {
                State::Absent => {}
                State::A => {
                    entries.insert("sha512".into(), "cc".into());
                }
                State::B => {
                    entries.insert("sha512".into(), "dd".into());
                }
            }
            DigestSet { entries }
        }

        // independent oracle: enumerate shared keys directly
        fn oracle(left: &DigestSet, right: &DigestSet) -> DigestMatch {
            let shared: Vec<&String> = left
                .entries
                .keys()
                .filter(|k| right.entries.contains_key(*k))
                .collect();
            if shared.is_empty() {
                return DigestMatch::NoOverlap;
            }
            if shared
                .iter()
                .any(|k| left.entries[k.as_str()] != right.entries[k.as_str()])
            {
                return DigestMatch::Mismatch;
            }
            DigestMatch::Match
        }

        let mut cases = 0;
        for &l256 in &STATES {
            for &l512 in &STATES {
                for &r256 in &STATES {
                    for &r512 in &STATES {
                        let left = build(l256, l512);
                        let right = build(r256, r512);
                        if left.is_empty() || right.is_empty() {
                            continue; // both sets non-empty by precondition
                        }
                        cases += 1;
                        assert_eq!(
                            left.compare(&right),
                            oracle(&left, &right),
                            "left={left} right={right}"
                        );
                        // verdict symmetry
                        assert_eq!(left.compare(&right), right.compare(&left));
                    }
                }
            }
        }
        assert!(cases <= 81, "{cases} cases");
        assert!(cases >= 60, "table unexpectedly small: {cases}");
    });
}

#[test]
fn criterion_5_glob_agrees_with_expansion_oracle() {
    criterion(5, "glob matcher agrees with oracle on 200-pair corpus", || {
        // independent route: a DP table instead of the two-pointer matcher
        fn dp_match(pattern: &str, value: &str) -> bool {
            let p: Vec<char> = pattern.chars().collect();
            let v: Vec<char> = value.chars().collect();
            let mut table = vec![vec![false; v.len() + 1]; p.len() + 1];
            table[p.len()][v.len()] = true;
            for i in (0..p.len()).rev() {
                for j in (0..=v.len()).rev() {
                    table[i][j] = if p[i] == '*' {
                        table[i + 1][j] || (j < v.len() && table[i][j + 1])
                    } else {
                        j < v.len() && (p[i] == '?' || p[i] == v[j]) && table[i + 1][j + 1]
                    };
                }
            }
            table[0][0]
        }

        let raw = std::fs::read(fixtures_dir().join("glob-corpus.json")).unwrap();
        let cases: Vec<serde_json::Value> = serde_json::from_slice(&raw).unwrap();
        assert_eq!(cases.len(), 200);
        for case in &cases {
            let pattern = case["pattern"].as_str().unwrap();
            let value = case["value"].as_str().unwrap();
            let expected = case["expected"].as_bool().unwrap();
            assert_eq!(
                match_glob(pattern, value),
                expected,
                "frozen corpus: {pattern:?} vs {value:?}"
            );
            assert_eq!(
                dp_match(pattern, value),
                expected,
                "oracle disagrees with frozen corpus: {pattern:?} vs {value:?}"
            );
        }

        // the stated flag-spelling cases
        assert!(match_glob("-fstack-protector*", "-fstack-protector"));
        assert!(match_glob("-fstack-protector*", "-fstack-protector-strong"));
        assert!(!match_glob("-fstack-protector*", "-fno-stack-protector"));
    });
}

fn scai_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scai"))
}

#[test]
fn criterion_6_producer_consumer_end_to_end() {
    criterion(6, "wrapped compile signs a report that passes policy", || {
        let started = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path();

        std::fs::write(
            path.join("fakecc"),
            "#!/bin/sh\nout=\"\"\nwhile [ $# -gt 0 ]; do\n  if [ \"$1\" = \"-o\" ]; then out=\"$2\"; shift; fi\n  shift\ndone\necho known-output > \"$out\"\n",
        )
        .unwrap();
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(
                path.join("fakecc"),
                std::fs::Permissions::from_mode(0o755),
            )
            .unwrap();
        }

        let status = scai_bin()
            .args(["keygen", "--out", "leo.json", "--seed", &"7".repeat(64)])
            .current_dir(path)
            .status()
            .unwrap();
        assert!(status.success());

        std::fs::write(
            path.join("rules.json"),
            serde_json::json!({
                "rules": [{
                    "attribute": "WITH_STACK_PROTECTION",
                    "whenFlagMatches": "-fstack-protector*"
                }],
                "producerDescriptor": {
                    "name": "fakecc",
                    "uri": "http://example.com/toolchains/fakecc"
                }
            })
            .to_string(),
        )
        .unwrap();
        std::fs::write(
            path.join("ana-policy.json"),
            serde_json::json!({
                "trustedKeys": ["leo.json"],
                "threshold": 1,
                "rules": [{
                    "kind": "require",
                    "attribute": "WITH_STACK_PROTECTION",
                    "conditions": {"flags": "-fstack-protector*"}
                }]
            })
            .to_string(),
        )
        .unwrap();

        // producer side: wrapped compile with the flag
        let out = scai_bin()
            .args([
                "produce",
                "--rules",
                "rules.json",
                "--key",
                "leo.json",
                "--output",
                "hello-world",
                "--",
                "./fakecc",
                "-fstack-protector",
                "-o",
                "hello-world",
                "hello-world.c",
            ])
            .current_dir(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

        // the subject digest equals an independently computed sha256 of the
        // output file (frozen from a standalone digest tool)
        let envelope = Envelope::from_json(
            &std::fs::read(path.join("hello-world.scai.json")).unwrap(),
        )
        .unwrap();
        let payload: serde_json::Value =
            serde_json::from_slice(&envelope.payload_bytes().unwrap()).unwrap();
        assert_eq!(
            payload["subject"]["digest"]["sha256"],
            "0fd99bd36afbee48f63a53284691bb327bd2c5a8bb67a5979703508f4a28eb2f"
        );

        // consumer side: Ana's policy passes
        let out = scai_bin()
            .args([
                "check",
                "--envelope",
                "hello-world.scai.json",
                "--policy",
                "ana-policy.json",
            ])
            .current_dir(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

        // removing the flag: no rule matches, nothing is emitted
        let out = scai_bin()
            .args([
                "produce",
                "--rules",
                "rules.json",
                "--key",
                "leo.json",
                "--output",
                "hello-world2",
                "--",
                "./fakecc",
                "-o",
                "hello-world2",
                "hello-world.c",
            ])
            .current_dir(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("no rule matched"));

        // with a baseline attribute the report emits but the policy fails
        std::fs::write(
            path.join("rules-baseline.json"),
            serde_json::json!({
                "rules": [{
                    "attribute": "WITH_STACK_PROTECTION",
                    "whenFlagMatches": "-fstack-protector*"
                }],
                "baselineAttribute": "COMPILED",
                "producerDescriptor": {"name": "fakecc", "uri": "http://example.com/toolchains/fakecc"}
            })
            .to_string(),
        )
        .unwrap();
        let out = scai_bin()
            .args([
                "produce",
                "--rules",
                "rules-baseline.json",
                "--key",
                "leo.json",
                "--output",
                "hello-world3",
                "--",
                "./fakecc",
                "-o",
                "hello-world3",
                "hello-world.c",
            ])
            .current_dir(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let out = scai_bin()
            .args([
                "check",
                "--envelope",
                "hello-world3.scai.json",
                "--policy",
                "ana-policy.json",
            ])
            .current_dir(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "baseline-only report must fail the policy");

        assert!(
            started.elapsed() < Duration::from_secs(5),
            "end-to-end exceeded 5s"
        );
    });
}

fn typed_conditions() -> Conditions {
    let mut body = serde_json::Map::new();
    body.insert(
        "type".to_string(),
        serde_json::json!("scai-kit/flag-conditions/v1"),
    );
    Conditions::new(body)
}

fn chain_report(name: &str, artifact: &[u8], deps: Vec<(String, Vec<u8>, DigestSet)>) -> Report {
    let mut attributes = vec![AttributeAssertion {
        attribute: "COMPILED".to_string(),
        conditions: Some(typed_conditions()),
        target: None,
        evidence: None,
    }];
    for (dep_name, dep_artifact, envelope_digest) in deps {
        attributes.push(AttributeAssertion {
            attribute: "ATTESTED_DEPENDENCY".to_string(),
            conditions: None,
            target: Some(ResourceDescriptor {
                name: Some(dep_name.clone()),
                digest: Some(sha256_digest(&dep_artifact)),
                ..Default::default()
            }),
            evidence: Some(ResourceDescriptor {
                name: Some(format!("{dep_name}-build-report")),
                digest: Some(envelope_digest),
                media_type: Some(PAYLOAD_TYPE.to_string()),
                ..Default::default()
            }),
        });
    }
    Report {
        subject: ResourceDescriptor {
            name: Some(name.to_string()),
            digest: Some(sha256_digest(artifact)),
            ..Default::default()
        },
        attributes,
        producer: None,
    }
}

#[test]
fn criterion_7_transitive_graph() {
    criterion(7, "3-deep chain verifies; corruption and cycles fail", || {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("store")).unwrap();
        let pair = KeyPair::from_seed(&[0x53u8; 32]).unwrap();
        let trusted = [pair.trusted_key()];

        // app -> lib -> sublib
        let sublib = chain_report("sublib.so", b"sublib artifact", vec![]);
        let sublib_env = sign_report(&sublib, &pair, PAYLOAD_TYPE).unwrap();
        let sublib_digest = store.put(&sublib_env.to_json()).unwrap();

        let lib = chain_report(
            "lib.so",
            b"lib artifact",
            vec![("sublib.so".into(), b"sublib artifact".to_vec(), sublib_digest)],
        );
        let lib_env = sign_report(&lib, &pair, PAYLOAD_TYPE).unwrap();
        let lib_digest = store.put(&lib_env.to_json()).unwrap();

        let app = chain_report(
            "app",
            b"app artifact",
            vec![("lib.so".into(), b"lib artifact".to_vec(), lib_digest.clone())],
        );
        let root = sign_report(&app, &pair, PAYLOAD_TYPE).unwrap();

        let resolver = Resolver::new(Some(&store));
        let graph = build_graph(&root, &trusted, &resolver, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(graph.nodes.len(), 3);
        assert_eq!(graph.edges.len(), 2);

        let policy = TrustPolicy {
            trusted_keys: trusted.to_vec(),
            threshold: 1,
            rules: Vec::new(),
            mode: DecodeMode::Lax,
            signature_only: true,
        };
        let verdict = verify_graph(&graph, &[], &policy, &resolver);
        assert!(verdict.pass, "{verdict:?}");

        // corrupting the middle envelope fails, naming the edge from the root
        let lib_hex = lib_digest.get("sha256").unwrap();
        let object_path = dir
            .path()
            .join("store/objects/sha256")
            .join(&lib_hex[..2])
            .join(lib_hex);
        let mut bytes = std::fs::read(&object_path).unwrap();
        let middle = bytes.len() / 2;
        bytes[middle] ^= 0x01;
        std::fs::write(&object_path, bytes).unwrap();

        match build_graph(&root, &trusted, &resolver, DEFAULT_MAX_DEPTH) {
            Err(GraphError::ChildVerificationFailed {
                from,
                assertion_index,
                ..
            }) => {
                assert_eq!(from, digest_key(&sha256_digest(b"app artifact")));
                assert_eq!(assertion_index, 1);
            }
            other => panic!("expected ChildVerificationFailed, got {other:?}"),
        }

        // injected cycle: two reports whose evidence URIs reference each other
        let evidence = |uri: &str| ResourceDescriptor {
            uri: Some(uri.to_string()),
            name: Some("peer".to_string()),
            media_type: Some(PAYLOAD_TYPE.to_string()),
            ..Default::default()
        };
        let make = |name: &str, artifact: &[u8], peer_uri: &str| Report {
            subject: ResourceDescriptor {
                name: Some(name.to_string()),
                digest: Some(sha256_digest(artifact)),
                ..Default::default()
            },
            attributes: vec![AttributeAssertion {
                attribute: "ATTESTED_DEPENDENCY".to_string(),
                conditions: None,
                target: None,
                evidence: Some(evidence(peer_uri)),
            }],
            producer: None,
        };
        let a = scai_kit::envelope::sign_report_with_mode(
            &make("a", b"artifact a", "mem://b"),
            &pair,
            PAYLOAD_TYPE,
            DecodeMode::Lax,
        )
        .unwrap();
        let b = scai_kit::envelope::sign_report_with_mode(
            &make("b", b"artifact b", "mem://a"),
            &pair,
            PAYLOAD_TYPE,
            DecodeMode::Lax,
        )
        .unwrap();
        let mut fetcher = MemoryFetcher::new();
        fetcher.insert("mem://a", a.to_json());
        fetcher.insert("mem://b", b.to_json());
        let cyclic = Resolver::new(None).fetcher(fetcher);
        match build_graph(&a, &trusted, &cyclic, DEFAULT_MAX_DEPTH) {
            Err(GraphError::CycleDetected { .. }) => {}
            other => panic!("expected CycleDetected, got {other:?}"),
        }
    });
}

#[test]
fn criterion_8_store_integrity_fuzz() {
    criterion(8, "on-disk corruption always detected; resolve never lies", || {
        let mut rng = StdRng::seed_from_u64(0x5ca1_0008);
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut detected = 0usize;
        let trials = 200usize;

        for _ in 0..trials {
            let len = rng.gen_range(1..512);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let digest = store.put(&bytes).unwrap();
            let hex_digest = digest.get("sha256").unwrap();
            let path = dir
                .path()
                .join("objects/sha256")
                .join(&hex_digest[..2])
                .join(hex_digest);

            let mut corrupted = std::fs::read(&path).unwrap();
            let position = rng.gen_range(0..corrupted.len());
            let mut flip = rng.gen::<u8>();
            if flip == 0 {
                flip = 1;
            }
            corrupted[position] ^= flip;
            std::fs::write(&path, &corrupted).unwrap();

            if matches!(
                store.get(&digest),
                Err(scai_kit::store::StoreError::CorruptObject { .. })
            ) {
                detected += 1;
            }
            std::fs::remove_file(&path).unwrap();
        }
        assert_eq!(detected, trials, "every corruption must be detected on get");

        // resolve never returns digest-mismatched bytes
        for _ in 0..100 {
            let len = rng.gen_range(1..256);
            let genuine: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let mut served = genuine.clone();
            let position = rng.gen_range(0..served.len());
            let mut flip = rng.gen::<u8>();
            if flip == 0 {
                flip = 1;
            }
            served[position] ^= flip;

            let mut fetcher = MemoryFetcher::new();
            fetcher.insert("mem://object", served);
            let resolver = Resolver::new(None).fetcher(fetcher);
            let descriptor = ResourceDescriptor {
                digest: Some(sha256_digest(&genuine)),
                uri: Some("mem://object".to_string()),
                ..Default::default()
            };
            assert!(
                resolver.resolve(&descriptor).is_err(),
                "resolve must reject corrupted bytes"
            );
        }
    });
}

#[test]
fn criterion_9_canonical_golden_bytes() {
    criterion(9, "golden canonical bytes and number vectors hold", || {
        let raw = std::fs::read(fixtures_dir().join("golden-canonical.json")).unwrap();
        let golden: Vec<serde_json::Value> = serde_json::from_slice(&raw).unwrap();
        assert_eq!(golden.len(), 3);

        for entry in &golden {
            let name = entry["fixture"].as_str().unwrap();
            let expected_hex = entry["hex"].as_str().unwrap();
            let fixture_bytes = corpus(name);

            // canonicalizing the fixture text directly
            let direct = canonicalize_text(&fixture_bytes).unwrap();
            assert_eq!(hex::encode(direct.as_bytes()), expected_hex, "{name} (text)");

            // decode -> encode -> canonicalize gives the same bytes
            let report = decode_report(&fixture_bytes, DecodeMode::Lax).unwrap().value;
            let reencoded = canonicalize(&report.to_json_value());
            assert_eq!(
                hex::encode(reencoded.as_bytes()),
                expected_hex,
                "{name} (via decode)"
            );

            // stability across repeated runs
            let again = canonicalize_text(&fixture_bytes).unwrap();
            assert_eq!(direct.as_bytes(), again.as_bytes());
        }

        // published number serialization vectors (IEEE bit pattern, expected)
        let vectors: &[(&str, &str)] = &[
            ("0000000000000000", "0"),
            ("8000000000000000", "0"),
            ("0000000000000001", "5e-324"),
            ("8000000000000001", "-5e-324"),
            ("7fefffffffffffff", "1.7976931348623157e+308"),
            ("ffefffffffffffff", "-1.7976931348623157e+308"),
            ("4340000000000000", "9007199254740992"),
            ("c340000000000000", "-9007199254740992"),
            ("4430000000000000", "295147905179352830000"),
            ("44b52d02c7e14af5", "9.999999999999997e+22"),
            ("44b52d02c7e14af6", "1e+23"),
            ("44b52d02c7e14af7", "1.0000000000000001e+23"),
            ("444b1ae4d6e2ef4e", "999999999999999700000"),
            ("444b1ae4d6e2ef4f", "999999999999999900000"),
            ("444b1ae4d6e2ef50", "1e+21"),
            ("3eb0c6f7a0b5ed8c", "9.999999999999997e-7"),
            ("3eb0c6f7a0b5ed8d", "0.000001"),
            ("41b3de4355555553", "333333333.3333332"),
            ("41b3de4355555554", "333333333.33333325"),
            ("41b3de4355555555", "333333333.3333333"),
            ("41b3de4355555556", "333333333.3333334"),
            ("41b3de4355555557", "333333333.33333343"),
            ("becbf647612f3696", "-0.0000033333333333333333"),
            ("43143ff3c1cb0959", "1424953923781206.2"),
        ];
        for (bits_hex, expected) in vectors {
            let bits = u64::from_str_radix(bits_hex, 16).unwrap();
            let float = f64::from_bits(bits);
            let value = serde_json::Value::Number(serde_json::Number::from_f64(float).unwrap());
            assert_eq!(
                String::from_utf8(canonicalize(&value).into_vec()).unwrap(),
                *expected,
                "bit pattern {bits_hex}"
            );
        }

        // UTF-8 pass-through: é stays two raw bytes, unescaped
        let value = serde_json::json!({"x": "\u{00e9}"});
        assert_eq!(canonicalize(&value).as_bytes(), b"{\"x\":\"\xc3\xa9\"}");
    });
}
