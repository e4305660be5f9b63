//! Phase 1: flash-loan identification. Runs every provider detector over a
//! corpus, extracts the loan parameters each pattern names, and brackets the
//! loan's internal-call span between disbursement and repayment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Corpus;
use crate::model::{
    token_transfer_view, Address, EventLog, Selector, TransactionBundle, TxHash, U256,
};
use crate::registry::{
    Category, Matcher, Param, ParamSource, Pattern, PatternRegistry, PatternRole, Platform,
};

/// Internal-call index interval from loan disbursement to repayment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Span {
    pub int_start: u32,
    pub int_end: u32,
}

impl Span {
    pub fn new(int_start: u32, int_end: u32) -> Span {
        Span { int_start, int_end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.int_start <= other.int_start && other.int_end <= self.int_end
    }
}

/// One identified flash loan with its extracted parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlashLoanRecord {
    pub provider: Platform,
    pub service_provider_addr: Address,
    pub runner: Address,
    pub asset_in: Option<Address>,
    pub asset_out: Address,
    #[serde(with = "crate::model::u256_dec")]
    pub amount_in: U256,
    pub block_number: u64,
    pub tx_index: u32,
    pub tx_hash: TxHash,
    pub span: Span,
}

/// Non-fatal per-bundle note emitted while detecting; never aborts a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    pub tx_hash: Option<TxHash>,
    pub stage: String,
    pub detector: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(tx_hash: Option<TxHash>, stage: &str, detector: &str, message: String) -> Self {
        Diagnostic {
            tx_hash,
            stage: stage.to_string(),
            detector: detector.to_string(),
            message,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IdentifyOptions {
    /// When set, drops the extra emitter constraint on the dYdX event chain
    /// and matches on hashes alone, as the original catalog does.
    pub paper_faithful: bool,
}

#[derive(Debug, Default)]
pub struct IdentifyOutcome {
    pub records: Vec<FlashLoanRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Where a pattern fired inside a bundle.
#[derive(Debug, Clone, Copy)]
pub enum MatchSite {
    Log(usize),
    Call(usize),
}

fn read_param_from_log(
    bundle: &TransactionBundle,
    log: &EventLog,
    source: ParamSource,
) -> Option<[u8; 32]> {
    match source {
        ParamSource::Topic(i) => log.topics.get(i as usize).map(|t| t.0),
        ParamSource::Data(i) => log.data_word(i as usize),
        ParamSource::Emitter => Some(log.emitter.to_word()),
        ParamSource::Caller => {
            let frame = &bundle.calls[log.after_call_index as usize];
            Some(frame.caller.to_word())
        }
        ParamSource::Callee => {
            let frame = &bundle.calls[log.after_call_index as usize];
            Some(frame.callee.to_word())
        }
        ParamSource::Arg(_) => None,
    }
}

fn read_param_from_call(
    call: &crate::model::InternalCall,
    source: ParamSource,
) -> Option<[u8; 32]> {
    match source {
        ParamSource::Arg(i) => crate::abi::arg_word(&call.calldata, i as usize),
        ParamSource::Caller => Some(call.caller.to_word()),
        ParamSource::Callee => Some(call.callee.to_word()),
        ParamSource::Emitter | ParamSource::Topic(_) | ParamSource::Data(_) => None,
    }
}

/// Extracted parameter words keyed by parameter name.
#[derive(Debug, Default)]
pub struct ParamValues {
    words: std::collections::BTreeMap<Param, [u8; 32]>,
}

impl ParamValues {
    pub fn address(&self, param: Param) -> Option<Address> {
        self.words.get(&param).map(Address::from_word)
    }

    pub fn amount(&self, param: Param) -> Option<U256> {
        self.words.get(&param).map(|w| U256::from_big_endian(w))
    }
}

/// Reads every parameter a pattern maps, from the match site per the
/// pattern's sources; event-based patterns read topics/data, call-based
/// patterns read calldata. Missing sources simply leave the parameter unset.
pub fn extract_params(
    bundle: &TransactionBundle,
    pattern: &Pattern,
    site: MatchSite,
) -> ParamValues {
    let mut values = ParamValues::default();
    for (param, source) in &pattern.params {
        let word = match site {
            MatchSite::Log(i) => read_param_from_log(bundle, &bundle.logs[i], *source),
            MatchSite::Call(i) => read_param_from_call(&bundle.calls[i], *source),
        };
        if let Some(word) = word {
            values.words.insert(*param, word);
        }
    }
    values
}

/// Walks the internal calls for the first transfer of `asset` out of
/// `provider` (the disbursement) and the first later transfer of `asset`
/// back into `provider` (the repayment), starting at `from_index`.
pub fn span_from_transfers(
    bundle: &TransactionBundle,
    provider: &Address,
    asset: &Address,
    from_index: u32,
) -> Option<Span> {
    let mut start = None;
    for call in &bundle.calls[from_index as usize..] {
        let Some(transfer) = token_transfer_view(call) else {
            continue;
        };
        if transfer.token != *asset {
            continue;
        }
        match start {
            None => {
                if transfer.from == *provider {
                    start = Some(call.index);
                }
            }
            Some(s) => {
                if transfer.to == *provider {
                    return Some(Span::new(s, call.index));
                }
            }
        }
    }
    None
}

/// Builds a loan record out of an extracted parameter set, or reports the
/// first missing required parameter.
fn record_from_params(
    bundle: &TransactionBundle,
    provider: Platform,
    provider_addr: Address,
    values: &ParamValues,
    span: Span,
) -> Result<FlashLoanRecord, &'static str> {
    let runner = values.address(Param::Runner).ok_or("runner")?;
    let asset_out = values.address(Param::AssetOut).ok_or("asset_out")?;
    let amount_in = values.amount(Param::AmountIn).ok_or("amount_in")?;
    Ok(FlashLoanRecord {
        provider,
        service_provider_addr: provider_addr,
        runner,
        asset_in: values.address(Param::AssetIn),
        asset_out,
        amount_in,
        block_number: bundle.block_number,
        tx_index: bundle.tx_index,
        tx_hash: bundle.tx_hash,
        span,
    })
}

/// Flash loans from the pool's loan event: the event hash must match and the
/// emitter must be the lending pool itself; the span is recovered from the
/// reserve-token transfers to and from the pool.
pub fn detect_aave(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    _opts: &IdentifyOptions,
) -> (Vec<FlashLoanRecord>, Vec<Diagnostic>) {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let patterns = registry.find(&Platform::Aave, Category::FlashLoan);
    let Some(pattern) = patterns
        .iter()
        .find(|p| p.role == PatternRole::Detect && matches!(p.matcher, Matcher::EventTopic { .. }))
    else {
        return (records, diagnostics);
    };
    let Matcher::EventTopic { hash, emitter } = &pattern.matcher else {
        unreachable!();
    };
    let mut scan_from = 0u32;
    for (i, log) in bundle.logs.iter().enumerate() {
        if log.topic0() != Some(*hash) {
            continue;
        }
        if !registry.book.constraint_allows(emitter, &log.emitter) {
            continue;
        }
        let values = extract_params(bundle, pattern, MatchSite::Log(i));
        let Some(asset) = values.address(Param::AssetOut) else {
            diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "aave",
                "loan event matched but parameters did not decode".to_string(),
            ));
            continue;
        };
        let Some(span) = span_from_transfers(bundle, &log.emitter, &asset, scan_from) else {
            diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "aave",
                "no disbursement/repayment transfer pair for loan event".to_string(),
            ));
            continue;
        };
        scan_from = span.int_end + 1;
        match record_from_params(bundle, Platform::Aave, log.emitter, &values, span) {
            Ok(record) => records.push(record),
            Err(missing) => diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "aave",
                format!("required parameter {missing} missing"),
            )),
        }
    }
    (records, diagnostics)
}

/// Flash loans via the token-lending flash-borrow entry point: a call with
/// the published selector whose callee is a configured iToken.
pub fn detect_bzx(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    _opts: &IdentifyOptions,
) -> (Vec<FlashLoanRecord>, Vec<Diagnostic>) {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let patterns = registry.find(&Platform::Bzx, Category::FlashLoan);
    let Some(pattern) = patterns.iter().find(|p| {
        p.role == PatternRole::Detect && matches!(p.matcher, Matcher::FunctionSelector { .. })
    }) else {
        return (records, diagnostics);
    };
    let Matcher::FunctionSelector { selector, callee } = &pattern.matcher else {
        unreachable!();
    };
    if registry.book.bzx_itokens.is_empty() {
        diagnostics.push(Diagnostic::new(
            Some(bundle.tx_hash),
            "identify",
            "bzx",
            "detector disabled: no iToken addresses configured".to_string(),
        ));
        return (records, diagnostics);
    }
    for call in &bundle.calls {
        if call.selector != Some(*selector) {
            continue;
        }
        if !registry.book.constraint_allows(callee, &call.callee) {
            continue;
        }
        let values = extract_params(bundle, pattern, MatchSite::Call(call.index as usize));
        if values.amount(Param::AmountIn).is_none() || values.address(Param::Runner).is_none() {
            diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "bzx",
                format!("calldata too short on flash borrow call {}", call.index),
            ));
            continue;
        }
        // Disbursement/repayment transfers bracket the span; when the
        // trace carries none, the borrow call's own subtree stands in.
        let span = span_for_bzx(bundle, &call.callee, call.index)
            .unwrap_or_else(|| Span::new(call.index, bundle.subtree_end(call.index)));
        match record_from_params(bundle, Platform::Bzx, call.callee, &values, span) {
            Ok(record) => records.push(record),
            Err(missing) => diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "bzx",
                format!("required parameter {missing} missing"),
            )),
        }
    }
    (records, diagnostics)
}

/// First transfer out of the iToken after the borrow call, paired with the
/// first later transfer back into it (any token: the lent asset is whatever
/// the iToken disbursed).
fn span_for_bzx(bundle: &TransactionBundle, itoken: &Address, call_index: u32) -> Option<Span> {
    let mut start = None;
    let mut asset = None;
    for call in &bundle.calls[call_index as usize + 1..] {
        let Some(transfer) = token_transfer_view(call) else {
            continue;
        };
        match start {
            None => {
                if transfer.from == *itoken {
                    start = Some(call.index);
                    asset = Some(transfer.token);
                }
            }
            Some(s) => {
                if transfer.to == *itoken && Some(transfer.token) == asset {
                    return Some(Span::new(s, call.index));
                }
            }
        }
    }
    None
}

/// `uniswapV2Call(address,uint256,uint256,bytes)`
pub const SEL_UNISWAP_V2_CALLBACK: Selector = Selector([0x10, 0xd1, 0xe8, 0x5c]);

/// Flash swaps: a `swap` call on a known pair whose `data` argument is
/// non-empty and whose callback subtree pays tokens back to the pair.
pub fn detect_uniswap_v2(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    _opts: &IdentifyOptions,
) -> (Vec<FlashLoanRecord>, Vec<Diagnostic>) {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let patterns = registry.find(&Platform::UniswapV2, Category::FlashLoan);
    let Some(swap_pattern) = patterns
        .iter()
        .find(|p| matches!(p.matcher, Matcher::FunctionSelector { .. }))
    else {
        return (records, diagnostics);
    };
    let Matcher::FunctionSelector { selector, .. } = &swap_pattern.matcher else {
        unreachable!();
    };
    if registry.book.known_pairs_len() == 0 {
        diagnostics.push(Diagnostic::new(
            Some(bundle.tx_hash),
            "identify",
            "uniswap_v2",
            "detector disabled: no pair contracts known (run pair discovery or configure known_pairs)"
                .to_string(),
        ));
        return (records, diagnostics);
    }
    for call in &bundle.calls {
        if call.selector != Some(*selector) {
            continue;
        }
        if !registry.book.contains_pair(&call.callee) {
            continue;
        }
        let pair = call.callee;
        // swap(amount0Out, amount1Out, to, data): a flash swap requires the
        // callback payload to be non-empty.
        let Some(data_arg) = crate::abi::arg_dynamic_bytes(&call.calldata, 3) else {
            diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "uniswap_v2",
                format!("swap call {} calldata did not decode", call.index),
            ));
            continue;
        };
        if data_arg.is_empty() {
            continue; // ordinary swap
        }
        let subtree_end = bundle.subtree_end(call.index);
        let children = &bundle.calls[call.index as usize + 1..=subtree_end as usize];

        // disbursement: first transfer out of the pair inside the swap subtree
        let disbursed = children.iter().find_map(|c| {
            token_transfer_view(c)
                .filter(|t| t.from == pair)
                .map(|t| (c.index, t))
        });

        // the callback frame invoked on the receiver
        let callback = children
            .iter()
            .find(|c| c.selector == Some(SEL_UNISWAP_V2_CALLBACK) && c.caller == pair);
        let Some(callback) = callback else {
            continue; // no payback action possible
        };
        let callback_end = bundle.subtree_end(callback.index);
        let payback = bundle.calls[callback.index as usize..=callback_end as usize]
            .iter()
            .find_map(|c| {
                token_transfer_view(c)
                    .filter(|t| t.to == pair)
                    .map(|t| (c.index, t))
            });
        let Some((payback_index, payback_transfer)) = payback else {
            continue; // condition 3 unmet: nothing returned to the pair
        };
        let runner = crate::abi::arg_address(&call.calldata, 2).unwrap_or(call.caller);
        let (asset_out, amount_in) = match disbursed {
            Some((_, t)) => (t.token, t.amount),
            None => (payback_transfer.token, payback_transfer.amount),
        };
        records.push(FlashLoanRecord {
            provider: Platform::UniswapV2,
            service_provider_addr: pair,
            runner,
            asset_in: Some(payback_transfer.token),
            asset_out,
            amount_in,
            block_number: bundle.block_number,
            tx_index: bundle.tx_index,
            tx_hash: bundle.tx_hash,
            span: Span::new(call.index, payback_index),
        });
    }
    (records, diagnostics)
}

/// Flash loans assembled from the margin protocol's meta-transaction events:
/// an operate log followed (optionally via a call log) by a withdraw log and
/// then a deposit log, in strict order. The span runs from the withdraw
/// log's call position to the deposit log's call position.
pub fn detect_dydx(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    opts: &IdentifyOptions,
) -> (Vec<FlashLoanRecord>, Vec<Diagnostic>) {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let patterns = registry.find(&Platform::Dydx, Category::FlashLoan);
    let Some(pattern) = patterns.iter().find(|p| {
        p.role == PatternRole::Detect && matches!(p.matcher, Matcher::OrderedEventChain { .. })
    }) else {
        return (records, diagnostics);
    };
    let Matcher::OrderedEventChain { steps, emitter } = &pattern.matcher else {
        unreachable!();
    };
    let required: Vec<_> = steps.iter().filter(|s| !s.optional).collect();
    if required.len() < 2 {
        return (records, diagnostics);
    }
    let emitter_ok = |log: &EventLog| {
        opts.paper_faithful || registry.book.constraint_allows(emitter, &log.emitter)
    };

    let mut cursor = 0usize;
    'outer: loop {
        // match the required steps as a subsequence of the log stream
        let mut positions = Vec::with_capacity(required.len());
        let mut search_from = cursor;
        for step in &required {
            let found = bundle.logs[search_from..]
                .iter()
                .position(|log| log.topic0() == Some(step.hash) && emitter_ok(log))
                .map(|off| search_from + off);
            match found {
                Some(pos) => {
                    positions.push(pos);
                    search_from = pos + 1;
                }
                None => break 'outer,
            }
        }
        // required steps: operate, withdraw, deposit
        let withdraw_pos = positions[positions.len() - 2];
        let deposit_pos = positions[positions.len() - 1];
        let withdraw = &bundle.logs[withdraw_pos];
        let deposit = &bundle.logs[deposit_pos];
        let span = Span::new(withdraw.after_call_index, deposit.after_call_index);
        if span.int_start > span.int_end {
            diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "dydx",
                "withdraw/deposit logs out of call order".to_string(),
            ));
            cursor = deposit_pos + 1;
            continue;
        }
        let values = extract_params(bundle, pattern, MatchSite::Log(withdraw_pos));
        let asset_in = crate::abi::data_address(&deposit.data, 1);
        match record_from_params(bundle, Platform::Dydx, withdraw.emitter, &values, span) {
            Ok(mut record) => {
                record.asset_in = asset_in.or(record.asset_in);
                records.push(record);
            }
            Err(missing) => diagnostics.push(Diagnostic::new(
                Some(bundle.tx_hash),
                "identify",
                "dydx",
                format!("required parameter {missing} missing"),
            )),
        }
        cursor = deposit_pos + 1;
    }
    (records, diagnostics)
}

/// Runs every provider detector over one bundle. Reverted transactions are
/// skipped: a loan that never settled has no financial effect.
pub fn identify_bundle(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    opts: &IdentifyOptions,
) -> (Vec<FlashLoanRecord>, Vec<Diagnostic>) {
    if bundle.reverted {
        return (Vec::new(), Vec::new());
    }
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for detector in [detect_aave, detect_bzx, detect_uniswap_v2, detect_dydx] {
        let (mut r, mut d) = detector(bundle, registry, opts);
        records.append(&mut r);
        diagnostics.append(&mut d);
    }
    records.sort_by_key(|r| (r.block_number, r.tx_index, r.span.int_start, r.span.int_end));
    (records, diagnostics)
}

/// Phase-1 entry point: identifies flash loans across a corpus, in parallel
/// over bundles, with a deterministic merge by (block, tx index, span).
pub fn identify(
    corpus: &Corpus,
    registry: &PatternRegistry,
    opts: &IdentifyOptions,
) -> IdentifyOutcome {
    let per_bundle: Vec<(Vec<FlashLoanRecord>, Vec<Diagnostic>)> = corpus
        .bundles
        .par_iter()
        .map(|bundle| identify_bundle(bundle, registry, opts))
        .collect();
    let mut outcome = IdentifyOutcome::default();
    for (records, diagnostics) in per_bundle {
        outcome.records.extend(records);
        outcome.diagnostics.extend(diagnostics);
    }
    outcome
        .records
        .sort_by_key(|r| (r.block_number, r.tx_index, r.span.int_start, r.span.int_end));
    outcome
}
