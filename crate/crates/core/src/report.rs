//! Report aggregation and result persistence: per-provider loan
//! distribution, per-kind behavior counts (both per transaction, matching
//! the published accounting), per-transaction span tables, and the JSONL/CSV
//! output files with their manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::advanced::{AdvancedBehavior, AdvancedKind};
use crate::identify::FlashLoanRecord;
use crate::model::{Address, TransactionBundle, TxHash};
use crate::primitive::{PrimitiveBehavior, PrimitiveKind};
use crate::registry::PatternRegistry;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("stale results: manifest registry checksum {found} does not match current {expected}")]
    StaleResults { found: String, expected: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProviderStats {
    pub tx_count: u64,
    pub unique_borrowers: u64,
}

/// Loan distribution in the shape of the per-provider table: transaction
/// and borrower counts per provider, with totals deduplicated across
/// providers (so per-provider sums can exceed the totals).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistributionReport {
    pub per_provider: BTreeMap<String, ProviderStats>,
    pub totals: ProviderStats,
    pub top_borrowers: Vec<(Address, u64)>,
}

pub fn distribution(records: &[FlashLoanRecord]) -> DistributionReport {
    let mut txs_by_provider: BTreeMap<String, BTreeSet<TxHash>> = BTreeMap::new();
    let mut borrowers_by_provider: BTreeMap<String, BTreeSet<Address>> = BTreeMap::new();
    let mut all_txs: BTreeSet<TxHash> = BTreeSet::new();
    let mut all_borrowers: BTreeSet<Address> = BTreeSet::new();
    let mut borrower_txs: BTreeMap<Address, BTreeSet<TxHash>> = BTreeMap::new();

    for record in records {
        let provider = record.provider.name().to_string();
        txs_by_provider
            .entry(provider.clone())
            .or_default()
            .insert(record.tx_hash);
        borrowers_by_provider
            .entry(provider)
            .or_default()
            .insert(record.runner);
        all_txs.insert(record.tx_hash);
        all_borrowers.insert(record.runner);
        borrower_txs
            .entry(record.runner)
            .or_default()
            .insert(record.tx_hash);
    }

    let per_provider = txs_by_provider
        .iter()
        .map(|(provider, txs)| {
            let borrowers = borrowers_by_provider
                .get(provider)
                .map(|b| b.len() as u64)
                .unwrap_or(0);
            (
                provider.clone(),
                ProviderStats {
                    tx_count: txs.len() as u64,
                    unique_borrowers: borrowers,
                },
            )
        })
        .collect();

    let mut top_borrowers: Vec<(Address, u64)> = borrower_txs
        .into_iter()
        .map(|(addr, txs)| (addr, txs.len() as u64))
        .collect();
    top_borrowers.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    top_borrowers.truncate(10);

    DistributionReport {
        per_provider,
        totals: ProviderStats {
            tx_count: all_txs.len() as u64,
            unique_borrowers: all_borrowers.len() as u64,
        },
        top_borrowers,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SwappingBreakdown {
    pub collateral: u64,
    pub loan: u64,
    pub platform: u64,
    pub total: u64,
}

/// Behavior distribution in the shape of the published behavior table:
/// counts are transactions (a transaction with three exchanges counts once
/// for Exchange). Instance counts are reported separately for analysts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BehaviorReport {
    pub primitive_counts: BTreeMap<String, u64>,
    /// Distinct transactions with at least one primitive.
    pub primitive_total: u64,
    pub advanced_counts: BTreeMap<String, u64>,
    pub swapping_breakdown: SwappingBreakdown,
    /// Distinct transactions with at least one advanced behavior.
    pub advanced_total: u64,
    pub instance_counts: BTreeMap<String, u64>,
}

pub fn behavior_summary(
    primitives: &[PrimitiveBehavior],
    advanced: &[AdvancedBehavior],
) -> BehaviorReport {
    let mut primitive_txs: BTreeMap<PrimitiveKind, BTreeSet<TxHash>> = BTreeMap::new();
    let mut advanced_txs: BTreeMap<AdvancedKind, BTreeSet<TxHash>> = BTreeMap::new();
    let mut any_primitive: BTreeSet<TxHash> = BTreeSet::new();
    let mut any_advanced: BTreeSet<TxHash> = BTreeSet::new();
    let mut instances: BTreeMap<String, u64> = BTreeMap::new();

    for behavior in primitives {
        primitive_txs
            .entry(behavior.kind)
            .or_default()
            .insert(behavior.tx_hash);
        any_primitive.insert(behavior.tx_hash);
        *instances
            .entry(behavior.kind.name().to_string())
            .or_insert(0) += 1;
    }
    for behavior in advanced {
        advanced_txs
            .entry(behavior.kind)
            .or_default()
            .insert(behavior.tx_hash);
        any_advanced.insert(behavior.tx_hash);
        *instances
            .entry(behavior.kind.name().to_string())
            .or_insert(0) += 1;
    }

    let primitive_counts = primitive_txs
        .iter()
        .map(|(kind, txs)| (kind.name().to_string(), txs.len() as u64))
        .collect();
    let advanced_counts: BTreeMap<String, u64> = advanced_txs
        .iter()
        .map(|(kind, txs)| (kind.name().to_string(), txs.len() as u64))
        .collect();
    let count_of =
        |kind: AdvancedKind| advanced_txs.get(&kind).map(|t| t.len() as u64).unwrap_or(0);
    let collateral = count_of(AdvancedKind::CollateralSwap);
    let loan = count_of(AdvancedKind::LoanSwap);
    let platform = count_of(AdvancedKind::PlatformSwap);

    BehaviorReport {
        primitive_counts,
        primitive_total: any_primitive.len() as u64,
        advanced_counts,
        swapping_breakdown: SwappingBreakdown {
            collateral,
            loan,
            platform,
            total: collateral + loan + platform,
        },
        advanced_total: any_advanced.len() as u64,
        instance_counts: instances,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpanRow {
    pub label: String,
    pub start: u32,
    pub end: u32,
}

/// Per-transaction classification table: one row per loan and per primitive
/// behavior, labeled `<behavior> in <platform>`, ordered by start index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpanTable {
    pub tx_hash: TxHash,
    pub rows: Vec<SpanRow>,
}

fn ordinal(n: usize) -> String {
    const WORDS: [&str; 10] = [
        "First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth",
        "Tenth",
    ];
    WORDS
        .get(n - 1)
        .map(|w| w.to_string())
        .unwrap_or_else(|| format!("{n}th"))
}

fn lending_label(behavior: &PrimitiveBehavior) -> &'static str {
    match behavior.sub_action.as_deref() {
        Some("Borrow") | Some("draw") => "Collateral Borrowing",
        Some("Repay") | Some("RepayBorrow") | Some("wipe") => "Loan Repayment",
        Some("Deposit") | Some("Mint") | Some("lock") => "Collateral Deposit",
        Some("Redeem") | Some("RedeemUnderlying") | Some("Burn") | Some("free") => {
            "Collateral Redemption"
        }
        _ => "Vault Adjustment",
    }
}

pub fn span_table_from_records(
    tx_hash: TxHash,
    loans: &[FlashLoanRecord],
    primitives: &[PrimitiveBehavior],
) -> SpanTable {
    let mut rows: Vec<SpanRow> = Vec::new();
    for loan in loans.iter().filter(|l| l.tx_hash == tx_hash) {
        rows.push(SpanRow {
            label: format!("Flash Loan in {}", loan.provider.name()),
            start: loan.span.int_start,
            end: loan.span.int_end,
        });
    }
    let mut tx_primitives: Vec<&PrimitiveBehavior> =
        primitives.iter().filter(|p| p.tx_hash == tx_hash).collect();
    tx_primitives.sort_by_key(|p| (p.span.int_start, p.span.int_end));
    let exchange_count = tx_primitives
        .iter()
        .filter(|p| p.kind == PrimitiveKind::Exchange)
        .count();
    let mut exchange_seen = 0usize;
    for behavior in tx_primitives {
        let platform = behavior.platform.trade_label();
        let label = match behavior.kind {
            PrimitiveKind::Exchange => {
                exchange_seen += 1;
                if exchange_count > 1 {
                    format!("{} Swapping in {}", ordinal(exchange_seen), platform)
                } else {
                    format!("Swapping in {platform}")
                }
            }
            PrimitiveKind::LendingBorrowing => {
                format!("{} in {}", lending_label(behavior), platform)
            }
            PrimitiveKind::MarginTrade => format!("Margin Trading in {platform}"),
            PrimitiveKind::Liquidation => format!("Liquidation in {platform}"),
        };
        rows.push(SpanRow {
            label,
            start: behavior.span.int_start,
            end: behavior.span.int_end,
        });
    }
    rows.sort_by_key(|r| (r.start, r.end));
    SpanTable { tx_hash, rows }
}

/// Span table for an analyzed bundle.
pub fn span_table(
    bundle: &TransactionBundle,
    loans: &[FlashLoanRecord],
    primitives: &[PrimitiveBehavior],
) -> SpanTable {
    span_table_from_records(bundle.tx_hash, loans, primitives)
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

pub const FLASHLOANS_FILE: &str = "flashloans.jsonl";
pub const PRIMITIVES_FILE: &str = "primitives.jsonl";
pub const ADVANCED_FILE: &str = "advanced.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub tool_version: String,
    pub registry_checksum: String,
    pub bundle_count: u64,
    pub corpus_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    pub loans: Vec<FlashLoanRecord>,
    pub primitives: Vec<PrimitiveBehavior>,
    pub advanced: Vec<AdvancedBehavior>,
}

pub fn corpus_digest(tx_hashes: &[TxHash]) -> String {
    let mut sorted: Vec<&TxHash> = tx_hashes.iter().collect();
    sorted.sort();
    let mut bytes = Vec::with_capacity(sorted.len() * 32);
    for hash in sorted {
        bytes.extend_from_slice(hash.as_bytes());
    }
    format!("0x{}", hex::encode(crate::abi::keccak256(&bytes)))
}

pub fn manifest_for(registry: &PatternRegistry, tx_hashes: &[TxHash]) -> Manifest {
    Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        registry_checksum: registry.checksum(),
        bundle_count: tx_hashes.len() as u64,
        corpus_digest: corpus_digest(tx_hashes),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ReportError> {
    use std::io::Write;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
    for item in items {
        let line = serde_json::to_string(item).expect("results serialize");
        writeln!(file, "{line}").map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| ReportError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Appends results to the output directory's JSONL files and rewrites the
/// manifest. Appending the same results twice is harmless: `load` returns
/// the deduplicated union.
pub fn persist(dir: &Path, results: &ResultSet, manifest: &Manifest) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    append_jsonl(&dir.join(FLASHLOANS_FILE), &results.loans)?;
    append_jsonl(&dir.join(PRIMITIVES_FILE), &results.primitives)?;
    append_jsonl(&dir.join(ADVANCED_FILE), &results.advanced)?;
    let mut manifest_text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    manifest_text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), &manifest_text)
}

fn dedup_by_key<T, K: Ord>(items: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if seen.insert(key(&item)) {
            out.push(item);
        }
    }
    out
}

/// Loads persisted results, validating the manifest's registry checksum
/// against the current registry. Duplicate lines (from repeated appends)
/// collapse to one record keyed by transaction and span.
pub fn load(dir: &Path, registry: &PatternRegistry) -> Result<(ResultSet, Manifest), ReportError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text =
        std::fs::read_to_string(&manifest_path).map_err(|source| ReportError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
    let manifest: Manifest =
        serde_json::from_str(&manifest_text).map_err(|e| ReportError::Malformed {
            path: manifest_path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?;
    let expected = registry.checksum();
    if manifest.registry_checksum != expected {
        return Err(ReportError::StaleResults {
            found: manifest.registry_checksum,
            expected,
        });
    }
    let loans: Vec<FlashLoanRecord> = read_jsonl(&dir.join(FLASHLOANS_FILE))?;
    let primitives: Vec<PrimitiveBehavior> = read_jsonl(&dir.join(PRIMITIVES_FILE))?;
    let advanced: Vec<AdvancedBehavior> = read_jsonl(&dir.join(ADVANCED_FILE))?;
    let results = ResultSet {
        loans: dedup_by_key(loans, |l| {
            (l.tx_hash, l.span, l.provider.name().to_string())
        }),
        primitives: dedup_by_key(primitives, |p| {
            (p.tx_hash, p.span, p.kind, p.platform.name().to_string())
        }),
        advanced: dedup_by_key(advanced, |a| {
            (
                a.tx_hash,
                a.kind,
                serde_json::to_string(&a.details).unwrap_or_default(),
            )
        }),
    };
    Ok((results, manifest))
}

// ---------------------------------------------------------------------------
// CSV renderings
// ---------------------------------------------------------------------------

pub fn distribution_csv(report: &DistributionReport) -> String {
    let mut out = String::from("provider,txCount,uniqueBorrowers\n");
    for (provider, stats) in &report.per_provider {
        out.push_str(&format!(
            "{provider},{},{}\n",
            stats.tx_count, stats.unique_borrowers
        ));
    }
    out.push_str(&format!(
        "Total,{},{}\n",
        report.totals.tx_count, report.totals.unique_borrowers
    ));
    out
}

pub fn behaviors_csv(report: &BehaviorReport) -> String {
    let mut out = String::from("section,kind,txCount\n");
    for (kind, count) in &report.primitive_counts {
        out.push_str(&format!("primitive,{kind},{count}\n"));
    }
    out.push_str(&format!("primitive,Total,{}\n", report.primitive_total));
    for (kind, count) in &report.advanced_counts {
        out.push_str(&format!("advanced,{kind},{count}\n"));
    }
    out.push_str(&format!("advanced,Total,{}\n", report.advanced_total));
    out
}

pub fn span_table_csv(table: &SpanTable) -> String {
    let mut out = String::from("behavior,startIndex,endIndex\n");
    for row in &table.rows {
        out.push_str(&format!("{},{},{}\n", row.label, row.start, row.end));
    }
    out
}
