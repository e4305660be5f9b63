//! Pipeline orchestration: pair discovery, the three phases in order, and
//! deterministic result assembly. Bundles are processed in parallel and
//! merged by (block number, transaction index), so repeated runs over the
//! same inputs produce byte-identical outputs.

use rayon::prelude::*;

use crate::advanced::{classify_advanced, AdvancedOptions};
use crate::identify::{identify_bundle, Diagnostic, IdentifyOptions};
use crate::ingest::{discover_pairs, Corpus};
use crate::primitive::classify;
use crate::registry::PatternRegistry;
use crate::report::ResultSet;

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub identify: IdentifyOptions,
    pub advanced: AdvancedOptions,
    /// Classify primitives even in transactions with no identified loan.
    pub include_all: bool,
    /// Worker threads; 0 means the library default.
    pub workers: usize,
}

#[derive(Debug, Default)]
pub struct PipelineOutcome {
    pub results: ResultSet,
    pub diagnostics: Vec<Diagnostic>,
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(job)
}

/// Phase 1 only.
pub fn run_identify(
    corpus: &Corpus,
    registry: &PatternRegistry,
    opts: &AnalysisOptions,
) -> PipelineOutcome {
    discover_pairs(corpus, registry);
    let identify_opts = opts.identify.clone();
    let outcome = with_pool(opts.workers, || {
        crate::identify::identify(corpus, registry, &identify_opts)
    });
    PipelineOutcome {
        results: ResultSet {
            loans: outcome.records,
            primitives: Vec::new(),
            advanced: Vec::new(),
        },
        diagnostics: outcome.diagnostics,
    }
}

/// All three phases. Phase 2 and 3 run only on transactions that carried at
/// least one identified loan, unless `include_all` is set.
pub fn run_full(
    corpus: &Corpus,
    registry: &PatternRegistry,
    opts: &AnalysisOptions,
) -> PipelineOutcome {
    discover_pairs(corpus, registry);
    let identify_opts = opts.identify.clone();
    let advanced_opts = opts.advanced.clone();
    let include_all = opts.include_all;

    let per_bundle: Vec<(ResultSet, Vec<Diagnostic>)> = with_pool(opts.workers, || {
        corpus
            .bundles
            .par_iter()
            .map(|bundle| {
                let mut diagnostics = Vec::new();
                let (loans, mut d1) = identify_bundle(bundle, registry, &identify_opts);
                diagnostics.append(&mut d1);
                let (primitives, advanced) = if loans.is_empty() && !include_all {
                    (Vec::new(), Vec::new())
                } else {
                    let (primitives, mut d2) = classify(bundle, &loans, registry);
                    diagnostics.append(&mut d2);
                    let (advanced, mut d3) =
                        classify_advanced(bundle, &primitives, &loans, registry, &advanced_opts);
                    diagnostics.append(&mut d3);
                    (primitives, advanced)
                };
                (
                    ResultSet {
                        loans,
                        primitives,
                        advanced,
                    },
                    diagnostics,
                )
            })
            .collect()
    });

    let mut outcome = PipelineOutcome::default();
    for (results, diagnostics) in per_bundle {
        outcome.results.loans.extend(results.loans);
        outcome.results.primitives.extend(results.primitives);
        outcome.results.advanced.extend(results.advanced);
        outcome.diagnostics.extend(diagnostics);
    }
    outcome
        .results
        .loans
        .sort_by_key(|r| (r.block_number, r.tx_index, r.span.int_start, r.span.int_end));
    outcome.results.primitives.sort_by_key(|p| {
        (
            p.block_number,
            p.tx_index,
            p.span.int_start,
            p.span.int_end,
            p.kind,
        )
    });
    outcome.results.advanced.sort_by(|a, b| {
        (
            a.tx_hash,
            a.kind,
            serde_json::to_string(&a.details).unwrap_or_default(),
        )
            .cmp(&(
                b.tx_hash,
                b.kind,
                serde_json::to_string(&b.details).unwrap_or_default(),
            ))
    });
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn full_run_is_deterministic_across_worker_counts() {
        let (corpus, _) = synth::generate_corpus(60, 11);
        let registry = synth::test_registry();
        let single = run_full(
            &corpus,
            &registry,
            &AnalysisOptions {
                workers: 1,
                ..AnalysisOptions::default()
            },
        );
        let registry2 = synth::test_registry();
        let quad = run_full(
            &corpus,
            &registry2,
            &AnalysisOptions {
                workers: 4,
                ..AnalysisOptions::default()
            },
        );
        assert_eq!(single.results.loans, quad.results.loans);
        assert_eq!(single.results.primitives, quad.results.primitives);
        assert_eq!(single.results.advanced, quad.results.advanced);
    }

    #[test]
    fn phase_two_skips_loanless_transactions_without_include_all() {
        let scenario = synth::Scenario::new(
            71,
            vec![synth::ScenarioStep::UniV2FlashSwap {
                payback_to_pair: false,
                empty_data: false,
            }],
        );
        let (bundle, _) = synth::generate(&scenario).unwrap();
        let corpus = Corpus::from_bundles(vec![bundle]).unwrap();
        let registry = synth::test_registry();
        let gated = run_full(&corpus, &registry, &AnalysisOptions::default());
        assert!(gated.results.loans.is_empty());
        assert!(gated.results.primitives.is_empty());

        let registry = synth::test_registry();
        let all = run_full(
            &corpus,
            &registry,
            &AnalysisOptions {
                include_all: true,
                ..AnalysisOptions::default()
            },
        );
        // the ordinary swap is still an exchange when the gate is lifted
        assert_eq!(all.results.primitives.len(), 1);
    }
}
