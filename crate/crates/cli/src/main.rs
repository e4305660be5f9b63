//! Operator surface for the flash-loan analysis pipeline.
//!
//! Exit codes: 0 success, 1 input error (missing files, unreachable node,
//! unknown transaction), 2 configuration error (bad registry, bad flags).
//! Diagnostics stream to stderr as one JSON object per line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thunderlens_core::advanced::LoanSwapIdentity;
use thunderlens_core::ingest::{self, Corpus};
use thunderlens_core::model::TxHash;
use thunderlens_core::pipeline::{self, AnalysisOptions};
use thunderlens_core::registry::{self, PatternRegistry};
use thunderlens_core::report;
use thunderlens_core::rpc::RpcClient;
use thunderlens_core::synth;
use thunderlens_core::Diagnostic;

#[derive(Parser)]
#[command(
    name = "thunderlens",
    version,
    about = "Flash-loan transaction analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Registry file (JSON) merged with or replacing the built-in catalog.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Directory of fixture files, or a single fixture file.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Output directory.
    #[arg(short = 'o', long = "out", default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = default_workers(), value_parser = clap::value_parser!(u16).range(1..))]
    workers: u16,
    /// Match on hashes alone, dropping the extra emitter constraints.
    #[arg(long)]
    paper_faithful: bool,
    /// Loan-swap identity check: flash_loan or new_loan.
    #[arg(long, default_value = "flash_loan")]
    loan_swap_identity: String,
}

#[derive(Subcommand)]
enum Command {
    /// Phase 1: identify flash loans and write flashloans.jsonl.
    Identify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Phases 2-3: classify primitives and advanced behaviors.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run all phases instead of requiring identify output.
        #[arg(long)]
        pipeline: bool,
        /// Classify transactions even without an identified loan.
        #[arg(long)]
        all: bool,
    },
    /// Aggregate persisted results into distribution/behavior reports.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the span table for one transaction.
        #[arg(long)]
        tx: Option<String>,
    },
    /// Fetch transactions from an archive node into fixture files.
    Fetch {
        /// Archive node endpoint (or env THUNDERLENS_RPC_URL).
        #[arg(long, env = "THUNDERLENS_RPC_URL")]
        rpc_url: Option<String>,
        /// Output directory for fetched fixtures.
        #[arg(short = 'o', long = "out", default_value = "fixtures")]
        out: PathBuf,
        /// Transaction hashes to fetch.
        tx_hashes: Vec<String>,
    },
    /// Generate a synthetic labeled corpus.
    Synth {
        /// Number of scenarios.
        #[arg(short = 'n', long = "count", default_value_t = 100)]
        count: usize,
        /// Corpus seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory.
        #[arg(short = 'o', long = "out", default_value = "synth_out")]
        out: PathBuf,
    },
}

fn emit_diagnostics(diagnostics: &[Diagnostic]) {
    for diagnostic in diagnostics {
        if let Ok(line) = serde_json::to_string(diagnostic) {
            eprintln!("{line}");
        }
    }
}

fn load_registry(path: &Option<PathBuf>) -> Result<PatternRegistry, String> {
    match path {
        None => Ok(registry::load_default()),
        Some(p) => registry::load_from_file(p).map_err(|e| e.to_string()),
    }
}

fn load_corpus(fixtures: &Option<PathBuf>) -> Result<Corpus, String> {
    let Some(path) = fixtures else {
        return Err("no input: pass --fixtures <dir|file>".to_string());
    };
    let source = if path.is_dir() {
        ingest::BundleSource::FixtureDir(path.clone())
    } else if path.is_file() {
        ingest::BundleSource::FixtureFile(path.clone())
    } else {
        return Err(format!("{} does not exist", path.display()));
    };
    ingest::load_fixtures(&source).map_err(|e| e.to_string())
}

fn analysis_options(common: &CommonArgs, include_all: bool) -> Result<AnalysisOptions, String> {
    let loan_swap_identity = match common.loan_swap_identity.as_str() {
        "flash_loan" | "flashloan" => LoanSwapIdentity::FlashLoan,
        "new_loan" | "newloan" => LoanSwapIdentity::NewLoan,
        other => return Err(format!("unknown loan swap identity {other:?}")),
    };
    Ok(AnalysisOptions {
        identify: thunderlens_core::identify::IdentifyOptions {
            paper_faithful: common.paper_faithful,
        },
        advanced: thunderlens_core::advanced::AdvancedOptions { loan_swap_identity },
        include_all,
        workers: common.workers as usize,
    })
}

fn default_workers() -> u16 {
    std::thread::available_parallelism()
        .map(|n| n.get().min(u16::MAX as usize) as u16)
        .unwrap_or(1)
}

fn write_text(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_identify(common: &CommonArgs) -> Result<(), CliError> {
    let registry = load_registry(&common.registry).map_err(CliError::Config)?;
    let options = analysis_options(common, false).map_err(CliError::Config)?;
    let corpus = load_corpus(&common.fixtures).map_err(CliError::Input)?;
    let outcome = pipeline::run_identify(&corpus, &registry, &options);
    emit_diagnostics(&outcome.diagnostics);
    let tx_hashes: Vec<TxHash> = corpus.bundles.iter().map(|b| b.tx_hash).collect();
    let manifest = report::manifest_for(&registry, &tx_hashes);
    report::persist(&common.out, &outcome.results, &manifest)
        .map_err(|e| CliError::Input(e.to_string()))?;
    println!(
        "identified {} flash loans across {} transactions",
        outcome.results.loans.len(),
        corpus.len()
    );
    Ok(())
}

fn cmd_classify(common: &CommonArgs, run_pipeline: bool, all: bool) -> Result<(), CliError> {
    let registry = load_registry(&common.registry).map_err(CliError::Config)?;
    let options = analysis_options(common, all).map_err(CliError::Config)?;
    let corpus = load_corpus(&common.fixtures).map_err(CliError::Input)?;
    if !run_pipeline {
        // phase composition: identify output must already exist
        let phase1 = common.out.join(report::FLASHLOANS_FILE);
        if !phase1.exists() {
            return Err(CliError::Input(format!(
                "{} not found; run identify first or pass --pipeline",
                phase1.display()
            )));
        }
    }
    let outcome = pipeline::run_full(&corpus, &registry, &options);
    emit_diagnostics(&outcome.diagnostics);
    let tx_hashes: Vec<TxHash> = corpus.bundles.iter().map(|b| b.tx_hash).collect();
    let manifest = report::manifest_for(&registry, &tx_hashes);
    // rewrite rather than append: classification is a fresh derivation
    for file in [
        report::FLASHLOANS_FILE,
        report::PRIMITIVES_FILE,
        report::ADVANCED_FILE,
    ] {
        let path = common.out.join(file);
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    report::persist(&common.out, &outcome.results, &manifest)
        .map_err(|e| CliError::Input(e.to_string()))?;
    println!(
        "classified {} primitives and {} advanced behaviors over {} loans",
        outcome.results.primitives.len(),
        outcome.results.advanced.len(),
        outcome.results.loans.len()
    );
    Ok(())
}

fn cmd_report(common: &CommonArgs, tx: &Option<String>) -> Result<(), CliError> {
    let registry = load_registry(&common.registry).map_err(CliError::Config)?;
    let (results, _manifest) =
        report::load(&common.out, &registry).map_err(|e| CliError::Input(e.to_string()))?;

    let distribution = report::distribution(&results.loans);
    let behaviors = report::behavior_summary(&results.primitives, &results.advanced);

    let mut distribution_json =
        serde_json::to_string_pretty(&distribution).expect("report serializes");
    distribution_json.push('\n');
    write_text(
        &common.out.join("report_distribution.json"),
        &distribution_json,
    )
    .map_err(CliError::Input)?;
    write_text(
        &common.out.join("report_distribution.csv"),
        &report::distribution_csv(&distribution),
    )
    .map_err(CliError::Input)?;

    let mut behaviors_json = serde_json::to_string_pretty(&behaviors).expect("report serializes");
    behaviors_json.push('\n');
    write_text(&common.out.join("report_behaviors.json"), &behaviors_json)
        .map_err(CliError::Input)?;
    write_text(
        &common.out.join("report_behaviors.csv"),
        &report::behaviors_csv(&behaviors),
    )
    .map_err(CliError::Input)?;

    if let Some(tx_text) = tx {
        let tx_hash = TxHash::from_hex(tx_text).map_err(|e| CliError::Config(e.to_string()))?;
        let known = results.loans.iter().any(|l| l.tx_hash == tx_hash)
            || results.primitives.iter().any(|p| p.tx_hash == tx_hash);
        if !known {
            return Err(CliError::Input(format!(
                "transaction {tx_text} not present in results"
            )));
        }
        let table = report::span_table_from_records(tx_hash, &results.loans, &results.primitives);
        let name = format!("span_{}", hex::encode(tx_hash.as_bytes()));
        let mut table_json = serde_json::to_string_pretty(&table).expect("table serializes");
        table_json.push('\n');
        write_text(&common.out.join(format!("{name}.json")), &table_json)
            .map_err(CliError::Input)?;
        write_text(
            &common.out.join(format!("{name}.csv")),
            &report::span_table_csv(&table),
        )
        .map_err(CliError::Input)?;
        for row in &table.rows {
            println!("{}\t{}\t{}", row.label, row.start, row.end);
        }
    }
    println!(
        "reports written to {} ({} loans, {} primitives, {} advanced)",
        common.out.display(),
        results.loans.len(),
        results.primitives.len(),
        results.advanced.len()
    );
    Ok(())
}

fn cmd_fetch(rpc_url: &Option<String>, out: &Path, tx_hashes: &[String]) -> Result<(), CliError> {
    let Some(endpoint) = rpc_url else {
        return Err(CliError::Config(
            "no endpoint: pass --rpc-url or set THUNDERLENS_RPC_URL".to_string(),
        ));
    };
    if tx_hashes.is_empty() {
        return Err(CliError::Config("no transaction hashes given".to_string()));
    }
    let client = RpcClient::new(endpoint.clone(), Some(out.to_path_buf()));
    for text in tx_hashes {
        let tx_hash = TxHash::from_hex(text).map_err(|e| CliError::Config(e.to_string()))?;
        let bundle = client
            .fetch_bundle(tx_hash)
            .map_err(|e| CliError::Input(e.to_string()))?;
        println!(
            "fetched {} ({} calls, {} logs)",
            text,
            bundle.calls.len(),
            bundle.logs.len()
        );
    }
    Ok(())
}

fn cmd_synth(count: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Input(e.to_string()))?;
    let (corpus, truths) = synth::generate_corpus(count, seed);
    ingest::write_corpus_dir(out, &corpus).map_err(|e| CliError::Input(e.to_string()))?;
    let mut ground_truth = String::new();
    for truth in &truths {
        ground_truth.push_str(&serde_json::to_string(truth).expect("truth serializes"));
        ground_truth.push('\n');
    }
    write_text(&out.join("ground_truth.jsonl"), &ground_truth).map_err(CliError::Input)?;
    write_text(
        &out.join("synth_registry.json"),
        &synth::synth_registry_file(),
    )
    .map_err(CliError::Input)?;
    println!(
        "wrote {count} fixtures + ground_truth.jsonl + synth_registry.json to {}",
        out.display()
    );
    Ok(())
}

enum CliError {
    Input(String),
    Config(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Identify { common } => cmd_identify(common),
        Command::Classify {
            common,
            pipeline,
            all,
        } => cmd_classify(common, *pipeline, *all),
        Command::Report { common, tx } => cmd_report(common, tx),
        Command::Fetch {
            rpc_url,
            out,
            tx_hashes,
        } => cmd_fetch(rpc_url, out, tx_hashes),
        Command::Synth { count, seed, out } => cmd_synth(*count, *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(message)) => {
            eprintln!(
                "{{\"error\":\"input\",\"message\":{}}}",
                serde_json::to_string(&message).unwrap_or_default()
            );
            ExitCode::from(1)
        }
        Err(CliError::Config(message)) => {
            eprintln!(
                "{{\"error\":\"config\",\"message\":{}}}",
                serde_json::to_string(&message).unwrap_or_default()
            );
            ExitCode::from(2)
        }
    }
}
