//! `scai` — create, sign, store, and verify attribute assertion metadata for
//! software artifacts.
//!
//! Exit codes: 0 success, 1 verification or policy failure, 2 usage error,
//! 3 I/O or resolution error. Verification failures are never conflated
//! with usage errors. With `--json`, commands emit a single JSON document on
//! stdout and diagnostics on stderr.

mod commands;
mod failure;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use failure::Failure;

#[derive(Parser)]
#[command(name = "scai", version, about = "Attribute assertion toolkit for software artifacts")]
struct Cli {
    /// Object store root (flag wins over the environment).
    #[arg(long, global = true, env = "SCAI_STORE")]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an ed25519 keypair and write it to a key file.
    Keygen {
        /// Key file to write (private key included, mode 0600).
        #[arg(long)]
        out: PathBuf,
        /// 64 hex chars; same seed, same key. Omit for fresh randomness.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Validate a report strictly, sign it, and write an envelope.
    Sign {
        /// Key file holding the private key.
        #[arg(long)]
        key: PathBuf,
        /// Report document to sign.
        #[arg(long)]
        report: PathBuf,
        /// Envelope file to write.
        #[arg(long)]
        out: PathBuf,
        /// Payload type stamped into the envelope.
        #[arg(long, default_value = scai_kit::envelope::PAYLOAD_TYPE)]
        payload_type: String,
    },
    /// Verify an envelope against trusted keys.
    Verify {
        /// Envelope file.
        #[arg(long)]
        envelope: PathBuf,
        /// Trusted key file; repeat to trust several.
        #[arg(long = "key", required = true)]
        keys: Vec<PathBuf>,
        /// Distinct trusted signatures required.
        #[arg(long, default_value_t = 1)]
        threshold: usize,
        #[arg(long)]
        json: bool,
    },
    /// Pretty-print a report, assertion, or envelope and flag lax-mode
    /// warnings without failing.
    Inspect {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Verify an envelope and evaluate its report against a trust policy.
    Check {
        #[arg(long)]
        envelope: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build and verify the transitive dependency graph of an envelope.
    Graph {
        #[arg(long)]
        envelope: PathBuf,
        /// Default policy applied to every node.
        #[arg(long)]
        policy: PathBuf,
        /// Per-node policy as SELECTOR=POLICY_FILE, selector globbing the
        /// subject name or uri; repeatable, first match wins.
        #[arg(long = "node-policy")]
        node_policies: Vec<String>,
        #[arg(long, default_value_t = scai_kit::graph::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run a command, hash its outputs, and emit one signed envelope per
    /// output. Everything after `--` is the wrapped command line, bit-exact.
    Produce {
        /// Rule set file.
        #[arg(long)]
        rules: PathBuf,
        /// Key file holding the signing key.
        #[arg(long)]
        key: PathBuf,
        /// Declared output file; repeatable.
        #[arg(long = "output", required = true)]
        outputs: Vec<PathBuf>,
        /// Directory for envelope files (default: next to each output as
        /// `<output>.scai.json`).
        #[arg(long)]
        envelope_dir: Option<PathBuf>,
        /// Write the run record here.
        #[arg(long)]
        record_out: Option<PathBuf>,
        /// The wrapped command line.
        #[arg(last = true, required = true)]
        argv: Vec<String>,
    },
    /// Content-addressed object store operations.
    Store {
        #[command(subcommand)]
        op: StoreOp,
    },
}

#[derive(Subcommand)]
enum StoreOp {
    /// Store a file's bytes; prints the digest.
    Put { file: PathBuf },
    /// Retrieve object bytes by digest (`sha256:<hex>` or bare hex).
    Get {
        digest: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let store = cli.store;
    let result = match cli.command {
        Command::Keygen { out, seed } => commands::keygen(&out, seed.as_deref()),
        Command::Sign {
            key,
            report,
            out,
            payload_type,
        } => commands::sign(&key, &report, &out, &payload_type),
        Command::Verify {
            envelope,
            keys,
            threshold,
            json,
        } => commands::verify(&envelope, &keys, threshold, json),
        Command::Inspect { file, json } => commands::inspect(&file, json),
        Command::Check {
            envelope,
            policy,
            json,
        } => commands::check(&envelope, &policy, store.as_deref(), json),
        Command::Graph {
            envelope,
            policy,
            node_policies,
            max_depth,
            json,
        } => commands::graph(
            &envelope,
            &policy,
            &node_policies,
            max_depth,
            store.as_deref(),
            json,
        ),
        Command::Produce {
            rules,
            key,
            outputs,
            envelope_dir,
            record_out,
            argv,
        } => commands::produce(
            &rules,
            &key,
            &outputs,
            envelope_dir.as_deref(),
            record_out.as_deref(),
            &argv,
        ),
        Command::Store { op } => match op {
            StoreOp::Put { file } => commands::store_put(store.as_deref(), &file),
            StoreOp::Get { digest, out } => {
                commands::store_get(store.as_deref(), &digest, out.as_deref())
            }
        },
    };

    match result {
        Ok(()) => {}
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            std::process::exit(code);
        }
    }
}
