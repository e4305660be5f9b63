//! Phase 2: primitive behavior classification. Matches the exchange,
//! lending & borrowing, margin trade and liquidation patterns against a
//! flash-loan transaction and extracts each behavior's parameters and span.

use serde::{Deserialize, Serialize};

use crate::abi;
use crate::identify::{extract_params, Diagnostic, FlashLoanRecord, MatchSite, Span};
use crate::model::{Address, EventLog, TransactionBundle, TxHash, U256};
use crate::registry::{Category, Matcher, Param, Pattern, PatternRegistry, PatternRole, Platform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Exchange,
    LendingBorrowing,
    MarginTrade,
    Liquidation,
}

impl PrimitiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveKind::Exchange => "Exchange",
            PrimitiveKind::LendingBorrowing => "LendingBorrowing",
            PrimitiveKind::MarginTrade => "MarginTrade",
            PrimitiveKind::Liquidation => "Liquidation",
        }
    }
}

/// Reference from a behavior back to the flash loan containing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoanRef {
    pub tx_hash: TxHash,
    pub span: Span,
}

/// One classified primitive action with its extracted parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrimitiveBehavior {
    pub kind: PrimitiveKind,
    pub sub_action: Option<String>,
    pub platform: Platform,
    pub service_provider_addr: Address,
    pub runner: Address,
    pub receiver: Option<Address>,
    pub asset_in: Option<Address>,
    pub asset_out: Option<Address>,
    #[serde(with = "crate::model::u256_dec_opt")]
    pub amount_in: Option<U256>,
    pub block_number: u64,
    pub tx_index: u32,
    pub tx_hash: TxHash,
    pub span: Span,
    pub inside_loan: bool,
    pub loan_ref: Option<LoanRef>,
}

impl PrimitiveBehavior {
    /// Checks the per-kind field presence rules and returns the first
    /// missing required parameter, if any.
    pub fn missing_required_param(&self) -> Option<Param> {
        let requires_receiver = matches!(
            self.kind,
            PrimitiveKind::Exchange | PrimitiveKind::LendingBorrowing | PrimitiveKind::Liquidation
        );
        let requires_asset_in = matches!(
            self.kind,
            PrimitiveKind::Exchange | PrimitiveKind::LendingBorrowing | PrimitiveKind::MarginTrade
        );
        if requires_receiver && self.receiver.is_none() {
            return Some(Param::Receiver);
        }
        if requires_asset_in && self.asset_in.is_none() {
            return Some(Param::AssetIn);
        }
        if self.asset_out.is_none() {
            return Some(Param::AssetOut);
        }
        if self.amount_in.is_none() {
            return Some(Param::AmountIn);
        }
        None
    }
}

/// The lending action family a behavior represents, derived from the
/// pattern's published action name (or the vault-update deltas for the
/// anonymous frob event). Drives the swapping detectors in phase 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LendingFamily {
    Borrow,
    Repay,
    Deposit,
    Redeem,
}

pub fn lending_family(behavior: &PrimitiveBehavior) -> Vec<LendingFamily> {
    if behavior.kind != PrimitiveKind::LendingBorrowing {
        return Vec::new();
    }
    let Some(sub_action) = behavior.sub_action.as_deref() else {
        return Vec::new();
    };
    sub_action
        .split('+')
        .filter_map(|token| match token {
            "Borrow" | "draw" => Some(LendingFamily::Borrow),
            "Repay" | "RepayBorrow" | "wipe" => Some(LendingFamily::Repay),
            "Deposit" | "Mint" | "lock" => Some(LendingFamily::Deposit),
            "Redeem" | "RedeemUnderlying" | "Burn" | "free" => Some(LendingFamily::Redeem),
            _ => None,
        })
        .collect()
}

/// Span of an event-anchored behavior: the subtree of the nearest enclosing
/// call to the emitting contract, or a single-call span at the log position
/// when no such frame exists.
fn event_behavior_span(bundle: &TransactionBundle, log: &EventLog) -> Span {
    match bundle.emitting_frame(log) {
        Some(root) => Span::new(root, bundle.subtree_end(root)),
        None => Span::new(log.after_call_index, log.after_call_index),
    }
}

fn loan_tag(span: &Span, loans: &[FlashLoanRecord]) -> (bool, Option<LoanRef>) {
    for loan in loans {
        if loan.span.contains(span) {
            return (
                true,
                Some(LoanRef {
                    tx_hash: loan.tx_hash,
                    span: loan.span,
                }),
            );
        }
    }
    (false, None)
}

fn behavior_from_event(
    bundle: &TransactionBundle,
    pattern: &Pattern,
    kind: PrimitiveKind,
    log_pos: usize,
    loans: &[FlashLoanRecord],
) -> PrimitiveBehavior {
    let log = &bundle.logs[log_pos];
    let values = extract_params(bundle, pattern, MatchSite::Log(log_pos));
    let span = event_behavior_span(bundle, log);
    let (inside_loan, loan_ref) = loan_tag(&span, loans);
    let runner = values
        .address(Param::Runner)
        .unwrap_or_else(|| bundle.calls[log.after_call_index as usize].caller);
    PrimitiveBehavior {
        kind,
        sub_action: Some(pattern.name.clone()),
        platform: pattern.platform.clone(),
        service_provider_addr: log.emitter,
        runner,
        receiver: values.address(Param::Receiver),
        asset_in: values.address(Param::AssetIn),
        asset_out: values.address(Param::AssetOut),
        amount_in: values.amount(Param::AmountIn),
        block_number: bundle.block_number,
        tx_index: bundle.tx_index,
        tx_hash: bundle.tx_hash,
        span,
        inside_loan,
        loan_ref,
    }
}

/// The anonymous vault-update event needs sign inspection: data words are
/// [ilk, dink, dart]; positive dink locks collateral, negative frees it,
/// positive dart draws debt, negative wipes it.
fn refine_frob(behavior: &mut PrimitiveBehavior, log: &EventLog) {
    let Some(dink_word) = log.data_word(1) else {
        return;
    };
    let Some(dart_word) = log.data_word(2) else {
        return;
    };
    let (dink_pos, dink) = abi::word_as_signed(&dink_word);
    let (dart_pos, dart) = abi::word_as_signed(&dart_word);
    let mut actions: Vec<&str> = Vec::new();
    if !dink.is_zero() {
        actions.push(if dink_pos { "lock" } else { "free" });
    }
    if !dart.is_zero() {
        actions.push(if dart_pos { "draw" } else { "wipe" });
    }
    if actions.is_empty() {
        actions.push("touch");
    }
    behavior.sub_action = Some(actions.join("+"));
    behavior.amount_in = Some(if !dink.is_zero() { dink } else { dart });
}

/// Margin trades need both signals: a mint call with one of the published
/// selectors and the margin-trade mint event inside that call's subtree.
/// The event alone is never enough.
pub fn match_margin_trade(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
    loans: &[FlashLoanRecord],
) -> Vec<PrimitiveBehavior> {
    let patterns = registry.find_category(Category::MarginTrade);
    let selectors: Vec<_> = patterns
        .iter()
        .filter_map(|p| match &p.matcher {
            Matcher::FunctionSelector { selector, .. } => Some((*selector, (*p).clone())),
            _ => None,
        })
        .collect();
    let events: Vec<_> = patterns
        .iter()
        .filter_map(|p| match &p.matcher {
            Matcher::EventTopic { hash, emitter } => Some((*hash, emitter.clone(), (*p).clone())),
            _ => None,
        })
        .collect();
    let mut behaviors = Vec::new();
    let mut used_logs: Vec<usize> = Vec::new();
    for call in &bundle.calls {
        let Some(call_selector) = call.selector else {
            continue;
        };
        let Some((_, selector_pattern)) = selectors.iter().find(|(s, _)| *s == call_selector)
        else {
            continue;
        };
        let subtree_end = bundle.subtree_end(call.index);
        let matched = bundle.logs.iter().enumerate().find(|(pos, log)| {
            !used_logs.contains(pos)
                && log.after_call_index >= call.index
                && log.after_call_index <= subtree_end
                && events.iter().any(|(hash, emitter, _)| {
                    log.topic0() == Some(*hash)
                        && registry.book.constraint_allows(emitter, &log.emitter)
                })
        });
        let Some((log_pos, log)) = matched else {
            continue;
        };
        used_logs.push(log_pos);
        let event_pattern = events
            .iter()
            .find(|(hash, _, _)| log.topic0() == Some(*hash))
            .map(|(_, _, p)| p.clone())
            .expect("matched above");
        let values = extract_params(bundle, &event_pattern, MatchSite::Log(log_pos));
        let span = Span::new(call.index, subtree_end);
        let (inside_loan, loan_ref) = loan_tag(&span, loans);
        behaviors.push(PrimitiveBehavior {
            kind: PrimitiveKind::MarginTrade,
            sub_action: Some(selector_pattern.name.clone()),
            platform: selector_pattern.platform.clone(),
            service_provider_addr: call.callee,
            runner: values.address(Param::Runner).unwrap_or(call.caller),
            receiver: None,
            asset_in: values.address(Param::AssetIn),
            asset_out: values.address(Param::AssetOut),
            amount_in: values.amount(Param::AmountIn),
            block_number: bundle.block_number,
            tx_index: bundle.tx_index,
            tx_hash: bundle.tx_hash,
            span,
            inside_loan,
            loan_ref,
        });
    }
    behaviors
}

/// Classifies one bundle's primitive behaviors against the registry.
/// Behaviors inside and outside the loan spans are both reported, tagged via
/// `inside_loan`; phase-3 analysis filters on the tag as needed.
pub fn classify(
    bundle: &TransactionBundle,
    loans: &[FlashLoanRecord],
    registry: &PatternRegistry,
) -> (Vec<PrimitiveBehavior>, Vec<Diagnostic>) {
    let mut behaviors = Vec::new();
    let mut diagnostics = Vec::new();

    for (category, kind) in [
        (Category::Exchange, PrimitiveKind::Exchange),
        (Category::LendingBorrowing, PrimitiveKind::LendingBorrowing),
        (Category::Liquidation, PrimitiveKind::Liquidation),
    ] {
        for pattern in registry.find_category(category) {
            if pattern.role != PatternRole::Detect {
                continue;
            }
            let Matcher::EventTopic { hash, emitter } = &pattern.matcher else {
                continue;
            };
            for (pos, log) in bundle.logs.iter().enumerate() {
                if log.topic0() != Some(*hash) {
                    continue;
                }
                if !registry.book.constraint_allows(emitter, &log.emitter) {
                    continue;
                }
                let mut behavior = behavior_from_event(bundle, pattern, kind, pos, loans);
                if pattern.platform == Platform::MakerDao {
                    refine_frob(&mut behavior, log);
                }
                if let Some(missing) = behavior.missing_required_param() {
                    diagnostics.push(Diagnostic::new(
                        Some(bundle.tx_hash),
                        "classify",
                        pattern.name.as_str(),
                        format!("required parameter {missing:?} missing, behavior skipped"),
                    ));
                    continue;
                }
                behaviors.push(behavior);
            }
        }
    }

    behaviors.extend(match_margin_trade(bundle, registry, loans));

    behaviors.sort_by(|a, b| {
        (a.span.int_start, a.span.int_end, a.kind, a.platform.name()).cmp(&(
            b.span.int_start,
            b.span.int_end,
            b.kind,
            b.platform.name(),
        ))
    });
    (behaviors, diagnostics)
}
