//! Phase 3: advanced behavior derivation. Combines phase-2 primitives (and
//! the configured anti-liquidation event) into the trader's intention:
//! arbitrage, anti-liquidation, and the three swapping variants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::identify::{Diagnostic, FlashLoanRecord, Span};
use crate::model::{Address, TransactionBundle, TxHash};
use crate::primitive::{lending_family, LendingFamily, PrimitiveBehavior, PrimitiveKind};
use crate::registry::{Category, Matcher, Param, PatternRegistry, PatternRole, Platform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdvancedKind {
    Arbitrage,
    AntiLiquidation,
    CollateralSwap,
    LoanSwap,
    PlatformSwap,
}

impl AdvancedKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdvancedKind::Arbitrage => "Arbitrage",
            AdvancedKind::AntiLiquidation => "AntiLiquidation",
            AdvancedKind::CollateralSwap => "CollateralSwap",
            AdvancedKind::LoanSwap => "LoanSwap",
            AdvancedKind::PlatformSwap => "PlatformSwap",
        }
    }
}

/// Pointer at an evidence primitive, resolvable against the phase-2 output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceRef {
    pub kind: PrimitiveKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Details {
    Arbitrage {
        trade_count: usize,
    },
    AntiLiquidation {
        emitter: Address,
    },
    CollateralSwap {
        old_collateral: Address,
        new_collateral: Address,
    },
    LoanSwap {
        old_debt_asset: Address,
        new_debt_asset: Address,
    },
    PlatformSwap {
        platform_a: Platform,
        platform_b: Platform,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdvancedBehavior {
    pub kind: AdvancedKind,
    pub runner: Address,
    pub tx_hash: TxHash,
    pub evidence: Vec<EvidenceRef>,
    pub details: Details,
}

/// Which identity the loan-swap confirmation checks. The published rule
/// ("the assets which pay back the old loan and the asset being borrowed
/// should also be identical") reads most coherently as: the flash-borrowed
/// asset equals the repaid debt. The literal alternative (repaid equals
/// newly borrowed) is selectable for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoanSwapIdentity {
    #[default]
    FlashLoan,
    NewLoan,
}

#[derive(Debug, Clone, Default)]
pub struct AdvancedOptions {
    pub loan_swap_identity: LoanSwapIdentity,
}

fn evidence(behavior: &PrimitiveBehavior) -> EvidenceRef {
    EvidenceRef {
        kind: behavior.kind,
        span: behavior.span,
    }
}

/// At least two trades launched by the same trader in one transaction.
pub fn detect_arbitrage(primitives: &[PrimitiveBehavior]) -> Vec<AdvancedBehavior> {
    let mut groups: BTreeMap<Address, Vec<&PrimitiveBehavior>> = BTreeMap::new();
    for behavior in primitives {
        if behavior.kind == PrimitiveKind::Exchange {
            groups.entry(behavior.runner).or_default().push(behavior);
        }
    }
    let mut out = Vec::new();
    for (runner, mut trades) in groups {
        if trades.len() < 2 {
            continue;
        }
        trades.sort_by_key(|b| (b.span.int_start, b.span.int_end));
        out.push(AdvancedBehavior {
            kind: AdvancedKind::Arbitrage,
            runner,
            tx_hash: trades[0].tx_hash,
            evidence: trades.iter().map(|b| evidence(b)).collect(),
            details: Details::Arbitrage {
                trade_count: trades.len(),
            },
        });
    }
    out
}

/// Anti-liquidation via the monitoring service's event. Inert until a
/// pattern is configured, since its hash is not published.
pub fn detect_anti_liquidation(
    bundle: &TransactionBundle,
    registry: &PatternRegistry,
) -> (Vec<AdvancedBehavior>, Vec<Diagnostic>) {
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let patterns: Vec<_> = registry
        .find_category(Category::AntiLiquidation)
        .into_iter()
        .filter(|p| p.role == PatternRole::Detect)
        .cloned()
        .collect();
    if patterns.is_empty() {
        diagnostics.push(Diagnostic::new(
            Some(bundle.tx_hash),
            "advanced",
            "anti_liquidation",
            "detector disabled: no anti-liquidation pattern configured".to_string(),
        ));
        return (out, diagnostics);
    }
    for pattern in &patterns {
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
            let values = crate::identify::extract_params(
                bundle,
                pattern,
                crate::identify::MatchSite::Log(pos),
            );
            let runner = values
                .address(Param::Runner)
                .unwrap_or_else(|| bundle.calls[log.after_call_index as usize].caller);
            out.push(AdvancedBehavior {
                kind: AdvancedKind::AntiLiquidation,
                runner,
                tx_hash: bundle.tx_hash,
                evidence: Vec::new(),
                details: Details::AntiLiquidation {
                    emitter: log.emitter,
                },
            });
        }
    }
    (out, diagnostics)
}

fn family_actions(
    primitives: &[PrimitiveBehavior],
    family: LendingFamily,
) -> Vec<&PrimitiveBehavior> {
    primitives
        .iter()
        .filter(|b| lending_family(b).contains(&family))
        .collect()
}

fn behavior_asset(behavior: &PrimitiveBehavior) -> Option<Address> {
    behavior.asset_out.or(behavior.asset_in)
}

/// Both compulsory actions in one transaction: redeeming one collateral type
/// and depositing a different one.
pub fn detect_collateral_swap(primitives: &[PrimitiveBehavior]) -> Vec<AdvancedBehavior> {
    let redeems = family_actions(primitives, LendingFamily::Redeem);
    let deposits = family_actions(primitives, LendingFamily::Deposit);
    let mut out = Vec::new();
    let mut seen: Vec<(Address, Address)> = Vec::new();
    for redeem in &redeems {
        let Some(old) = behavior_asset(redeem) else {
            continue;
        };
        for deposit in &deposits {
            let Some(new) = behavior_asset(deposit) else {
                continue;
            };
            if old == new || seen.contains(&(old, new)) {
                continue;
            }
            seen.push((old, new));
            out.push(AdvancedBehavior {
                kind: AdvancedKind::CollateralSwap,
                runner: redeem.runner,
                tx_hash: redeem.tx_hash,
                evidence: vec![evidence(redeem), evidence(deposit)],
                details: Details::CollateralSwap {
                    old_collateral: old,
                    new_collateral: new,
                },
            });
        }
    }
    out
}

/// Repaying an old debt and borrowing a new one in one transaction, with the
/// configured identity between the flash-borrowed and repaid assets.
pub fn detect_loan_swap(
    primitives: &[PrimitiveBehavior],
    loans: &[FlashLoanRecord],
    opts: &AdvancedOptions,
) -> Vec<AdvancedBehavior> {
    let repays = family_actions(primitives, LendingFamily::Repay);
    let borrows = family_actions(primitives, LendingFamily::Borrow);
    let mut out = Vec::new();
    let mut seen: Vec<(Address, Address)> = Vec::new();
    for repay in &repays {
        let Some(old) = behavior_asset(repay) else {
            continue;
        };
        for borrow in &borrows {
            let Some(new) = behavior_asset(borrow) else {
                continue;
            };
            if old == new {
                continue;
            }
            let identity_holds = match opts.loan_swap_identity {
                LoanSwapIdentity::FlashLoan => loans.iter().any(|l| l.asset_out == old),
                LoanSwapIdentity::NewLoan => loans.iter().any(|l| l.asset_out == new),
            };
            if !identity_holds || seen.contains(&(old, new)) {
                continue;
            }
            seen.push((old, new));
            out.push(AdvancedBehavior {
                kind: AdvancedKind::LoanSwap,
                runner: repay.runner,
                tx_hash: repay.tx_hash,
                evidence: vec![evidence(repay), evidence(borrow)],
                details: Details::LoanSwap {
                    old_debt_asset: old,
                    new_debt_asset: new,
                },
            });
        }
    }
    out
}

/// Closing a position on one platform (repay plus collateral withdrawal) and
/// depositing on a different one.
pub fn detect_platform_swap(primitives: &[PrimitiveBehavior]) -> Vec<AdvancedBehavior> {
    let repays = family_actions(primitives, LendingFamily::Repay);
    let redeems = family_actions(primitives, LendingFamily::Redeem);
    let deposits = family_actions(primitives, LendingFamily::Deposit);
    let mut out = Vec::new();
    let mut seen: Vec<(Platform, Platform)> = Vec::new();
    for repay in &repays {
        let Some(redeem) = redeems.iter().find(|r| r.platform == repay.platform) else {
            continue;
        };
        for deposit in &deposits {
            if deposit.platform == repay.platform {
                continue;
            }
            let pair = (repay.platform.clone(), deposit.platform.clone());
            if seen.contains(&pair) {
                continue;
            }
            seen.push(pair.clone());
            out.push(AdvancedBehavior {
                kind: AdvancedKind::PlatformSwap,
                runner: repay.runner,
                tx_hash: repay.tx_hash,
                evidence: vec![evidence(repay), evidence(redeem), evidence(deposit)],
                details: Details::PlatformSwap {
                    platform_a: pair.0,
                    platform_b: pair.1,
                },
            });
        }
    }
    out
}

/// Runs every advanced detector for one transaction.
pub fn classify_advanced(
    bundle: &TransactionBundle,
    primitives: &[PrimitiveBehavior],
    loans: &[FlashLoanRecord],
    registry: &PatternRegistry,
    opts: &AdvancedOptions,
) -> (Vec<AdvancedBehavior>, Vec<Diagnostic>) {
    let mut out = Vec::new();
    out.extend(detect_arbitrage(primitives));
    let (anti, diagnostics) = detect_anti_liquidation(bundle, registry);
    out.extend(anti);
    out.extend(detect_collateral_swap(primitives));
    out.extend(detect_loan_swap(primitives, loans, opts));
    out.extend(detect_platform_swap(primitives));
    out.sort_by(|a, b| {
        (
            a.kind,
            &a.runner,
            serde_json::to_string(&a.details).unwrap_or_default(),
        )
            .cmp(&(
                b.kind,
                &b.runner,
                serde_json::to_string(&b.details).unwrap_or_default(),
            ))
    });
    (out, diagnostics)
}
