//! `fairaudit`: offline audits, corpus sampling and statistics, and the
//! leaderboard server.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input. Errors are
//! printed to stderr as a single JSON line.

mod error;
mod report;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairaudit_core::corpus::{corpus_stats, load_corpus, stratified_sample};
use fairaudit_core::fairness::{run_audit, AuditConfig};
use fairaudit_core::store::validate_model_id;
use fairaudit_core::{Attribute, Corpus, Store, Transcripts};
use fairaudit_service::{ServiceConfig, DEFAULT_BIND, DEFAULT_QUEUE_DEPTH};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Fairness-adjusted ASR audits and leaderboard")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit one model's transcripts against a reference corpus.
    Audit(AuditArgs),
    /// Draw a seeded stratified sample of a corpus.
    Sample(SampleArgs),
    /// Print size, duration and per-attribute entropy of a corpus.
    Stats(StatsArgs),
    /// Run the HTTP leaderboard service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SampleSelection {
    /// Audit against a stratified sample of the corpus.
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Seed for the stratified sample.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// CSV with columns `utterance_id,hypothesis`.
    #[arg(long)]
    transcripts: PathBuf,
    #[arg(long)]
    model_id: String,
    /// Write the audit document here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the audit into this store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    #[command(flatten)]
    sample: SampleSelection,
    /// Minimum fraction of corpus utterances that need a hypothesis.
    #[arg(long, default_value_t = 0.95)]
    coverage_threshold: f64,
    /// Category weights, e.g. `gender=2,ethnicity=1`; unlisted categories weigh 1.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<String>,
    /// Compare raw whitespace tokens instead of normalized text.
    #[arg(long)]
    no_normalize: bool,
    /// Leave per-utterance detail out of the audit document.
    #[arg(long)]
    no_per_utterance: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Second corpus (usually a sample) to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Emit JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "FAIRAUDIT_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, env = "FAIRAUDIT_STORE_DIR", default_value = "store")]
    store: PathBuf,
    #[arg(long, env = "FAIRAUDIT_BIND", default_value = DEFAULT_BIND)]
    bind: SocketAddr,
    #[arg(long, env = "FAIRAUDIT_SAMPLE_FRACTION")]
    sample_fraction: Option<f64>,
    #[arg(long, env = "FAIRAUDIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_QUEUE_DEPTH)]
    queue_depth: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Audit(args) => audit(args),
        Command::Sample(args) => sample(args),
        Command::Stats(args) => stats(args),
        Command::Serve(args) => serve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}

fn load_sampled(path: &Path, selection: &SampleSelection) -> Result<Corpus, CliError> {
    let corpus = load_corpus(path)?;
    Ok(match selection.sample_fraction {
        Some(f) => stratified_sample(&corpus, f, selection.seed)?,
        None => corpus,
    })
}

fn parse_weights(specs: &[String]) -> Result<BTreeMap<Attribute, f64>, CliError> {
    let mut weights: BTreeMap<Attribute, f64> = Attribute::AUDITED.iter().map(|&a| (a, 1.0)).collect();
    for spec in specs {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::validation("invalid_weight", format!("expected name=value, got {spec:?}")))?;
        let attr: Attribute = name
            .trim()
            .parse()
            .map_err(|e| CliError::validation("invalid_weight", e))?;
        let w: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::validation("invalid_weight", format!("weight {value:?} is not a number")))?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(CliError::validation("invalid_weight", format!("weight for {attr} must be positive")));
        }
        weights.insert(attr, w);
    }
    Ok(weights)
}

fn audit(args: AuditArgs) -> Result<(), CliError> {
    validate_model_id(&args.model_id)?;
    if !(0.0..=1.0).contains(&args.coverage_threshold) {
        return Err(CliError::validation(
            "invalid_argument",
            format!("coverage threshold {} outside [0, 1]", args.coverage_threshold),
        ));
    }
    let config = AuditConfig {
        weights: parse_weights(&args.weights)?,
        coverage_threshold: args.coverage_threshold,
        normalize: !args.no_normalize,
        retain_per_utterance: !args.no_per_utterance,
        ..Default::default()
    };
    let corpus = load_sampled(&args.corpus, &args.sample)?;
    let transcripts = Transcripts::load(&args.transcripts)?;
    let result = run_audit(&corpus, &transcripts, &args.model_id, &config)?;

    if let Some(out) = &args.out {
        let bytes = serde_json::to_vec_pretty(&result).expect("audit serializes");
        std::fs::write(out, bytes)
            .map_err(|e| CliError::runtime("write_failed", format!("{}: {e}", out.display())))?;
    }
    if let Some(dir) = &args.store {
        let stored = Store::open(dir)?.save_audit(&result)?;
        eprintln!("stored {stored}");
    }
    print!("{}", report::audit_summary(&result));
    Ok(())
}

fn sample(args: SampleArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus)?;
    let sampled = stratified_sample(&corpus, args.fraction, args.seed)?;
    sampled
        .save_csv(&args.out)
        .map_err(|e| CliError::runtime("write_failed", e))?;
    println!(
        "sampled {} of {} records (fraction {}, seed {}) -> {}",
        sampled.len(),
        corpus.len(),
        args.fraction,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let left = corpus_stats(&load_corpus(&args.corpus)?);
    let right = args.compare.as_ref().map(load_corpus).transpose()?.map(|c| corpus_stats(&c));
    if args.json {
        let doc = serde_json::json!({ "corpus": left, "compare": right });
        println!("{}", serde_json::to_string_pretty(&doc).expect("stats serialize"));
    } else {
        print!(
            "{}",
            report::stats_table(&left, right.as_ref().map(|r| ("compare", r)), "corpus")
        );
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let config = ServiceConfig {
        corpus: args.corpus,
        store_dir: args.store,
        bind: args.bind,
        sample_fraction: args.sample_fraction,
        seed: args.seed,
        queue_depth: args.queue_depth,
        ..Default::default()
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::runtime("runtime_failed", e))?;
    runtime.block_on(fairaudit_service::serve(config, shutdown_signal()))?;
    Ok(())
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {}
        _ = terminate => {}
    }
}
