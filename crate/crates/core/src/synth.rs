//! Synthetic-fixture generator and ground-truth oracle.
//!
//! Scenarios are small scripts of loan and behavior steps. The generator
//! realizes them as transaction bundles using the published hashes and
//! selectors, and labels each bundle with the loans, primitives and advanced
//! behaviors the script implies — computed from the script structure alone,
//! never by running the detectors. Same (seed, script) always produces a
//! byte-identical bundle and labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abi::{self, Token};
use crate::identify::Span;
use crate::ingest::Corpus;
use crate::model::{
    Address, EventLog, InternalCall, Selector, TopicHash, TransactionBundle, TxHash, U256,
};
use crate::registry::{self, sig, PatternRegistry, Platform};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("script step {step}: {message}")]
    BadScript { step: usize, message: String },
}

/// Deterministic 64-bit generator (splitmix64); stable across platforms and
/// releases, unlike library RNGs.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound.max(1)
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }
}

// ---------------------------------------------------------------------------
// synthetic address space
// ---------------------------------------------------------------------------

/// All synthetic addresses share the `0x5e` prefix; the second byte tags the
/// role and the last byte indexes within the role.
fn synth_address(tag: u8, index: u8) -> Address {
    let mut bytes = [0u8; 20];
    bytes[0] = 0x5e;
    bytes[1] = tag;
    bytes[19] = index;
    Address(bytes)
}

pub const RUNNER_POOL: u8 = 64;
pub const ASSET_POOL: u8 = 16;
pub const PAIR_POOL: u8 = 8;
pub const ITOKEN_POOL: u8 = 4;

pub fn runner_eoa(i: u8) -> Address {
    synth_address(0x01, i % RUNNER_POOL)
}

pub fn runner_contract(i: u8) -> Address {
    synth_address(0x07, i % RUNNER_POOL)
}

pub fn asset(i: u8) -> Address {
    synth_address(0x02, i % ASSET_POOL)
}

pub fn exchange_venue(platform: &Platform) -> Address {
    let idx = match platform {
        Platform::UniswapV1 => 0,
        Platform::Balancer => 1,
        Platform::OneInch => 2,
        Platform::Synthetix => 3,
        Platform::CurveFi => 4,
        Platform::Kyber => 5,
        _ => 6,
    };
    synth_address(0x03, idx)
}

pub fn pair(i: u8) -> Address {
    synth_address(0x04, i % PAIR_POOL)
}

pub fn itoken(i: u8) -> Address {
    synth_address(0x05, i % ITOKEN_POOL)
}

pub fn defi_saver() -> Address {
    synth_address(0x06, 0)
}

pub fn lending_venue(platform: &Platform, asset_index: u8) -> Address {
    match platform {
        Platform::Compound => synth_address(0x08, asset_index % ASSET_POOL),
        Platform::MakerDao => synth_address(0x09, 0),
        Platform::Aave => synth_address(0x0b, 0),
        Platform::Bzx => synth_address(0x0c, 0),
        _ => synth_address(0x0c, 1),
    }
}

pub fn margin_venue() -> Address {
    synth_address(0x0a, 0)
}

pub fn liquidation_venue(platform: &Platform) -> Address {
    let idx = match platform {
        Platform::Aave => 0,
        Platform::Compound => 1,
        Platform::Dydx => 2,
        Platform::Opyn => 3,
        _ => 4,
    };
    synth_address(0x0d, idx)
}

pub fn unrelated_address(i: u8) -> Address {
    synth_address(0xee, i)
}

/// Event hash used for the configurable anti-liquidation pattern in the
/// synthetic registry; not a published value.
pub fn defi_saver_event_hash() -> TopicHash {
    abi::event_hash_of("SyntheticAutomatedRepay(address,address,uint256)")
}

/// The default registry extended with everything synthetic corpora need:
/// iToken addresses, the pair set, and an activated anti-liquidation
/// pattern for the synthetic monitoring service.
pub fn test_registry() -> PatternRegistry {
    registry::load_from_str(&synth_registry_file(), "<synth registry>")
        .expect("synthetic registry extension is well-formed")
}

/// The registry extension file shipped next to generated corpora.
pub fn synth_registry_file() -> String {
    let itokens: Vec<String> = (0..ITOKEN_POOL).map(|i| itoken(i).to_hex()).collect();
    let pairs: Vec<String> = (0..PAIR_POOL).map(|i| pair(i).to_hex()).collect();
    let file = serde_json::json!({
        "mode": "extend",
        "patterns": [{
            "platform": "DeFiSaver",
            "category": "anti_liquidation",
            "name": "AutomatedRepay",
            "matcher_kind": "event_topic",
            "event_hash": defi_saver_event_hash().to_hex(),
            "emitter": {"book": "defi_saver_emitters"},
            "parameter_map": {"runner": "topic:1"}
        }],
        "address_book": {
            "bzx_itokens": itokens,
            "defi_saver_emitters": [defi_saver().to_hex()],
            "known_pairs": pairs
        }
    });
    let mut text = serde_json::to_string_pretty(&file).expect("registry json");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// scenarios
// ---------------------------------------------------------------------------

/// One-condition mutations used to flip positive fixtures negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// The detecting event is emitted by an unrelated address.
    WrongEmitter,
    /// The detecting call uses a different selector.
    WrongSelector,
    /// Deposit is logged before withdraw in the event chain.
    BrokenEventOrder,
    /// The swap's callback payload is empty.
    EmptyCallbackData,
    /// The payback transfer goes somewhere other than the pair.
    PaybackElsewhere,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStep {
    AaveFlashLoan {
        asset: u8,
        amount: u64,
    },
    DydxFlashLoan {
        with_call: bool,
    },
    UniV2FlashSwap {
        payback_to_pair: bool,
        empty_data: bool,
    },
    BzxFlashBorrow {
        on_itoken: bool,
    },
    Swap {
        platform: Platform,
        runner: u8,
        asset_in: u8,
        asset_out: u8,
    },
    Borrow {
        platform: Platform,
        asset: u8,
    },
    Repay {
        platform: Platform,
        asset: u8,
    },
    Deposit {
        platform: Platform,
        asset: u8,
    },
    Redeem {
        platform: Platform,
        asset: u8,
    },
    MarginMint {
        with_selector: bool,
    },
    Liquidate {
        platform: Platform,
    },
    AntiLiquidation,
    /// Inert filler: plain value transfers between runners.
    Noise {
        transfers: u8,
    },
    /// Applies a mutation to an earlier step.
    Mutate {
        target: usize,
        mutation: Mutation,
    },
    /// A step carrying its mutation inline.
    Mutated {
        step: Box<ScenarioStep>,
        mutation: Mutation,
    },
}

impl ScenarioStep {
    pub fn aave_flash_loan() -> ScenarioStep {
        ScenarioStep::AaveFlashLoan {
            asset: 0,
            amount: 1_000_000_000,
        }
    }

    pub fn univ2_flash_swap() -> ScenarioStep {
        ScenarioStep::UniV2FlashSwap {
            payback_to_pair: true,
            empty_data: false,
        }
    }

    pub fn bzx_flash_borrow() -> ScenarioStep {
        ScenarioStep::BzxFlashBorrow { on_itoken: true }
    }

    pub fn mutated(self, mutation: Mutation) -> ScenarioStep {
        ScenarioStep::Mutated {
            step: Box::new(self),
            mutation,
        }
    }

    fn is_loan(&self) -> bool {
        matches!(
            self,
            ScenarioStep::AaveFlashLoan { .. }
                | ScenarioStep::DydxFlashLoan { .. }
                | ScenarioStep::UniV2FlashSwap { .. }
                | ScenarioStep::BzxFlashBorrow { .. }
        ) || matches!(self, ScenarioStep::Mutated { step, .. } if step.is_loan())
    }

    fn is_behavior(&self) -> bool {
        matches!(
            self,
            ScenarioStep::Swap { .. }
                | ScenarioStep::Borrow { .. }
                | ScenarioStep::Repay { .. }
                | ScenarioStep::Deposit { .. }
                | ScenarioStep::Redeem { .. }
                | ScenarioStep::MarginMint { .. }
                | ScenarioStep::Liquidate { .. }
                | ScenarioStep::AntiLiquidation
        ) || matches!(self, ScenarioStep::Mutated { step, .. } if step.is_behavior())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub script: Vec<ScenarioStep>,
    /// Pins the scenario's main runner instead of drawing it from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner: Option<u8>,
}

impl Scenario {
    pub fn new(seed: u64, script: Vec<ScenarioStep>) -> Scenario {
        Scenario {
            seed,
            script,
            runner: None,
        }
    }

    pub fn with_runner(seed: u64, runner: u8, script: Vec<ScenarioStep>) -> Scenario {
        Scenario {
            seed,
            script,
            runner: Some(runner),
        }
    }
}

// ---------------------------------------------------------------------------
// ground truth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpectedLoan {
    pub provider: Platform,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpectedPrimitive {
    pub kind: String,
    pub platform: Platform,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ExpectedAdvanced {
    Arbitrage { runner: Address, trades: usize },
    AntiLiquidation { runner: Address },
    CollateralSwap { old: Address, new: Address },
    LoanSwap { old: Address, new: Address },
    PlatformSwap { from: Platform, to: Platform },
}

/// Labels the generator derives from the script; the independent oracle the
/// detectors are checked against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct GroundTruth {
    pub tx_hash: TxHash,
    pub expected_loans: Vec<ExpectedLoan>,
    pub expected_primitives: Vec<ExpectedPrimitive>,
    pub expected_advanced: Vec<ExpectedAdvanced>,
}

// ---------------------------------------------------------------------------
// bundle builder
// ---------------------------------------------------------------------------

struct Builder {
    calls: Vec<InternalCall>,
    logs: Vec<EventLog>,
    depth: u32,
    frames: Vec<u32>,
}

impl Builder {
    fn new() -> Builder {
        Builder {
            calls: Vec::new(),
            logs: Vec::new(),
            depth: 0,
            frames: Vec::new(),
        }
    }

    fn begin_call(
        &mut self,
        caller: Address,
        callee: Address,
        selector: Option<Selector>,
        calldata: Vec<u8>,
        value: U256,
    ) -> u32 {
        let index = self.calls.len() as u32;
        self.calls.push(InternalCall {
            index,
            depth: self.depth,
            caller,
            callee,
            selector,
            calldata,
            value,
        });
        self.frames.push(index);
        self.depth += 1;
        index
    }

    fn end_call(&mut self) {
        self.frames.pop();
        self.depth -= 1;
    }

    fn leaf(
        &mut self,
        caller: Address,
        callee: Address,
        selector: Option<Selector>,
        calldata: Vec<u8>,
        value: U256,
    ) -> u32 {
        let index = self.calls.len() as u32;
        self.calls.push(InternalCall {
            index,
            depth: self.depth,
            caller,
            callee,
            selector,
            calldata,
            value,
        });
        index
    }

    fn transfer(&mut self, caller: Address, token: Address, to: Address, amount: U256) -> u32 {
        let calldata = abi::encode_call(
            crate::model::SEL_TRANSFER,
            &[Token::Address(to), Token::Uint(amount)],
        );
        self.leaf(
            caller,
            token,
            Some(crate::model::SEL_TRANSFER),
            calldata,
            U256::zero(),
        )
    }

    fn transfer_from(
        &mut self,
        caller: Address,
        token: Address,
        from: Address,
        to: Address,
        amount: U256,
    ) -> u32 {
        let calldata = abi::encode_call(
            crate::model::SEL_TRANSFER_FROM,
            &[
                Token::Address(from),
                Token::Address(to),
                Token::Uint(amount),
            ],
        );
        self.leaf(
            caller,
            token,
            Some(crate::model::SEL_TRANSFER_FROM),
            calldata,
            U256::zero(),
        )
    }

    /// Emits a log positioned after the most recent call.
    fn emit(&mut self, emitter: Address, topics: Vec<TopicHash>, data: Vec<u8>) {
        let after_call_index = self.calls.len().saturating_sub(1) as u32;
        let log_index = self.logs.len() as u32;
        self.logs.push(EventLog {
            log_index,
            emitter,
            topics,
            data,
            after_call_index,
        });
    }
}

fn topic(text: &str) -> TopicHash {
    TopicHash::from_hex(text).expect("constant hash")
}

fn sel(text: &str) -> Selector {
    Selector::from_hex(text).expect("constant selector")
}

/// Canonical behavior-event payload: topics [hash, runner, receiver],
/// data [asset_in, asset_out, amount_in].
fn canonical_event(
    hash: TopicHash,
    runner: Address,
    receiver: Address,
    asset_in: Address,
    asset_out: Address,
    amount: U256,
) -> (Vec<TopicHash>, Vec<u8>) {
    (
        vec![
            hash,
            TopicHash(runner.to_word()),
            TopicHash(receiver.to_word()),
        ],
        abi::encode_tokens(&[
            Token::Address(asset_in),
            Token::Address(asset_out),
            Token::Uint(amount),
        ]),
    )
}

/// Margin-protocol account-update payload, data words
/// [accountNumber, market, deltaSign, deltaValue, parSign, parValue, to].
fn dydx_update_data(asset: Address, amount: U256, to: Address) -> Vec<u8> {
    abi::encode_tokens(&[
        Token::Uint(U256::zero()),
        Token::Address(asset),
        Token::Uint(U256::one()),
        Token::Uint(amount),
        Token::Uint(U256::one()),
        Token::Uint(amount),
        Token::Address(to),
    ])
}

enum OpenLoan {
    Aave {
        pool: Address,
        asset: Address,
        amount: U256,
        target: Address,
        t_out: u32,
        wrong_emitter: bool,
    },
    Dydx {
        solo: Address,
        solo_call: u32,
        asset: Address,
        amount: U256,
        owner: Address,
        target: Address,
        broken_order: bool,
        wrong_emitter: bool,
    },
    UniV2 {
        pair: Address,
        pair_call: u32,
        token: Address,
        amount: U256,
        runner: Address,
        target: Address,
        payback_to_pair: bool,
    },
    Bzx {
        token_contract: Address,
        asset: Address,
        amount: U256,
        target: Address,
        t_out: u32,
        positive: bool,
    },
}

struct Generation {
    b: Builder,
    rng: SplitMix64,
    runner_index: u8,
    open: Vec<OpenLoan>,
    loans: Vec<ExpectedLoan>,
    primitives: Vec<ExpectedPrimitive>,
    exchanges_by_runner: BTreeMap<Address, usize>,
    lending_actions: Vec<LendingAction>,
    anti_liquidations: Vec<Address>,
    loan_assets: Vec<Address>,
    registry_solo: Address,
    registry_pool: Address,
}

/// Script-level record of a lending action, used to derive the advanced
/// labels the same way the published rules combine them.
struct LendingAction {
    platform: Platform,
    family: ActionFamily,
    asset: Address,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActionFamily {
    Borrow,
    Repay,
    Deposit,
    Redeem,
}

fn exec_selector() -> Selector {
    abi::selector_of("execute(bytes)")
}

fn venue_selector(name: &str) -> Selector {
    abi::selector_of(name)
}

pub fn generate(scenario: &Scenario) -> Result<(TransactionBundle, GroundTruth), SynthError> {
    // resolve Mutate steps onto their targets
    let mut script: Vec<ScenarioStep> = Vec::new();
    for (i, step) in scenario.script.iter().enumerate() {
        match step {
            ScenarioStep::Mutate { target, mutation } => {
                if *target >= script.len() {
                    return Err(SynthError::BadScript {
                        step: i,
                        message: format!("mutation target {target} does not exist yet"),
                    });
                }
                let existing = script[*target].clone();
                if matches!(existing, ScenarioStep::Mutate { .. }) {
                    return Err(SynthError::BadScript {
                        step: i,
                        message: "mutation target is itself a mutation".to_string(),
                    });
                }
                script[*target] = existing.mutated(*mutation);
            }
            other => script.push(other.clone()),
        }
    }

    // behavior steps need a loan step before them: the pipeline only
    // classifies transactions that carried a flash loan
    let mut seen_loan = false;
    for (i, step) in script.iter().enumerate() {
        if step.is_loan() {
            seen_loan = true;
        }
        if step.is_behavior() && !seen_loan {
            return Err(SynthError::BadScript {
                step: i,
                message: "behavior step has no prior flash-loan context".to_string(),
            });
        }
    }

    let default_registry = registry::load_default();
    let mut rng = SplitMix64::new(scenario.seed);
    let drawn = rng.below(RUNNER_POOL as u64) as u8;
    let runner_index = scenario.runner.unwrap_or(drawn) % RUNNER_POOL;

    let mut generation = Generation {
        b: Builder::new(),
        rng,
        runner_index,
        open: Vec::new(),
        loans: Vec::new(),
        primitives: Vec::new(),
        exchanges_by_runner: BTreeMap::new(),
        lending_actions: Vec::new(),
        anti_liquidations: Vec::new(),
        loan_assets: Vec::new(),
        registry_solo: default_registry.book.dydx_solo_margin,
        registry_pool: default_registry.book.aave_lending_pool,
    };

    let eoa = runner_eoa(runner_index);
    let contract = runner_contract(runner_index);
    generation.b.begin_call(
        eoa,
        contract,
        Some(exec_selector()),
        Vec::new(),
        U256::zero(),
    );

    for (i, step) in script.iter().enumerate() {
        generation.run_step(i, step)?;
    }
    while let Some(loan) = generation.open.pop() {
        generation.close_loan(loan);
    }
    generation.b.end_call();

    let Generation {
        b,
        loans,
        mut primitives,
        exchanges_by_runner,
        lending_actions,
        anti_liquidations,
        loan_assets,
        ..
    } = generation;

    // --- advanced labels, from script structure only ---
    let mut advanced: Vec<ExpectedAdvanced> = Vec::new();
    for (runner, trades) in &exchanges_by_runner {
        if *trades >= 2 {
            advanced.push(ExpectedAdvanced::Arbitrage {
                runner: *runner,
                trades: *trades,
            });
        }
    }
    for runner in &anti_liquidations {
        advanced.push(ExpectedAdvanced::AntiLiquidation { runner: *runner });
    }
    let mut seen_pairs: Vec<(Address, Address)> = Vec::new();
    for redeem in lending_actions
        .iter()
        .filter(|a| a.family == ActionFamily::Redeem)
    {
        for deposit in lending_actions
            .iter()
            .filter(|a| a.family == ActionFamily::Deposit)
        {
            if redeem.asset != deposit.asset && !seen_pairs.contains(&(redeem.asset, deposit.asset))
            {
                seen_pairs.push((redeem.asset, deposit.asset));
                advanced.push(ExpectedAdvanced::CollateralSwap {
                    old: redeem.asset,
                    new: deposit.asset,
                });
            }
        }
    }
    let mut seen_loan_swaps: Vec<(Address, Address)> = Vec::new();
    for repay in lending_actions
        .iter()
        .filter(|a| a.family == ActionFamily::Repay)
    {
        if !loan_assets.contains(&repay.asset) {
            continue;
        }
        for borrow in lending_actions
            .iter()
            .filter(|a| a.family == ActionFamily::Borrow)
        {
            if repay.asset != borrow.asset
                && !seen_loan_swaps.contains(&(repay.asset, borrow.asset))
            {
                seen_loan_swaps.push((repay.asset, borrow.asset));
                advanced.push(ExpectedAdvanced::LoanSwap {
                    old: repay.asset,
                    new: borrow.asset,
                });
            }
        }
    }
    let mut seen_platform_swaps: Vec<(Platform, Platform)> = Vec::new();
    for repay in lending_actions
        .iter()
        .filter(|a| a.family == ActionFamily::Repay)
    {
        let closed_out = lending_actions
            .iter()
            .any(|a| a.family == ActionFamily::Redeem && a.platform == repay.platform);
        if !closed_out {
            continue;
        }
        for deposit in lending_actions
            .iter()
            .filter(|a| a.family == ActionFamily::Deposit)
        {
            if deposit.platform != repay.platform
                && !seen_platform_swaps
                    .contains(&(repay.platform.clone(), deposit.platform.clone()))
            {
                seen_platform_swaps.push((repay.platform.clone(), deposit.platform.clone()));
                advanced.push(ExpectedAdvanced::PlatformSwap {
                    from: repay.platform.clone(),
                    to: deposit.platform.clone(),
                });
            }
        }
    }

    // the three-phase pipeline only classifies flash-loan transactions
    if loans.is_empty() {
        primitives = Vec::new();
        advanced = Vec::new();
    }

    let script_digest = abi::keccak256(format!("{:?}", script).as_bytes());
    let mut hash_input = Vec::with_capacity(40);
    hash_input.extend_from_slice(b"synth-tx");
    hash_input.extend_from_slice(&scenario.seed.to_be_bytes());
    hash_input.extend_from_slice(&script_digest);
    let tx_hash = TxHash(abi::keccak256(&hash_input));

    let block_number = 9_000_000 + (scenario.seed % 500_000);
    let tx_index = (scenario.seed >> 48) as u32 % 200;

    let bundle = TransactionBundle {
        tx_hash,
        block_number,
        tx_index,
        sender: eoa,
        reverted: false,
        calls: b.calls,
        logs: b.logs,
    };
    debug_assert!(bundle.validate().is_ok());

    let truth = GroundTruth {
        tx_hash,
        expected_loans: loans,
        expected_primitives: primitives,
        expected_advanced: advanced,
    };
    Ok((bundle, truth))
}

impl Generation {
    fn runner(&self) -> Address {
        runner_eoa(self.runner_index)
    }

    fn contract(&self) -> Address {
        runner_contract(self.runner_index)
    }

    fn amount(&mut self) -> U256 {
        U256::from(self.rng.below(1_000_000_000_000) + 1)
    }

    fn run_step(&mut self, index: usize, step: &ScenarioStep) -> Result<(), SynthError> {
        match step {
            ScenarioStep::Mutated { step, mutation } => {
                self.emit_step(index, step, Some(*mutation))
            }
            other => self.emit_step(index, other, None),
        }
    }

    fn emit_step(
        &mut self,
        index: usize,
        step: &ScenarioStep,
        mutation: Option<Mutation>,
    ) -> Result<(), SynthError> {
        let contract = self.contract();
        let runner = self.runner();
        match step {
            ScenarioStep::AaveFlashLoan {
                asset: asset_i,
                amount,
            } => {
                let pool = self.registry_pool;
                let reserve = asset(*asset_i);
                let amount = U256::from(*amount);
                let calldata = abi::encode_call(
                    sel(sig::AAVE_FLASHLOAN_SEL),
                    &[
                        Token::Address(contract),
                        Token::Address(reserve),
                        Token::Uint(amount),
                        Token::Bytes(vec![0x01]),
                    ],
                );
                self.b.begin_call(
                    contract,
                    pool,
                    Some(sel(sig::AAVE_FLASHLOAN_SEL)),
                    calldata,
                    U256::zero(),
                );
                let t_out = self.b.transfer(pool, reserve, contract, amount);
                self.b.begin_call(
                    pool,
                    contract,
                    Some(venue_selector(
                        "executeOperation(address,uint256,uint256,bytes)",
                    )),
                    Vec::new(),
                    U256::zero(),
                );
                if !matches!(mutation, Some(Mutation::WrongEmitter)) {
                    self.loan_assets.push(reserve);
                }
                self.open.push(OpenLoan::Aave {
                    pool,
                    asset: reserve,
                    amount,
                    target: contract,
                    t_out,
                    wrong_emitter: matches!(mutation, Some(Mutation::WrongEmitter)),
                });
                Ok(())
            }
            ScenarioStep::DydxFlashLoan { with_call } => {
                let solo = self.registry_solo;
                let wrong_emitter = matches!(mutation, Some(Mutation::WrongEmitter));
                let emitter = if wrong_emitter {
                    unrelated_address(9)
                } else {
                    solo
                };
                let market = asset(1);
                let amount = self.amount();
                let solo_call = self.b.begin_call(
                    contract,
                    solo,
                    Some(venue_selector("operate((address,uint256)[],bytes[])")),
                    Vec::new(),
                    U256::zero(),
                );
                self.b.emit(
                    emitter,
                    vec![topic(sig::DYDX_LOG_OPERATE), TopicHash(runner.to_word())],
                    Vec::new(),
                );
                if *with_call {
                    self.b.emit(
                        emitter,
                        vec![topic(sig::DYDX_LOG_CALL), TopicHash(runner.to_word())],
                        dydx_update_data(market, U256::zero(), contract),
                    );
                }
                let broken_order = matches!(mutation, Some(Mutation::BrokenEventOrder));
                if broken_order {
                    // deposit first: a plain deposit-then-withdraw, not a loan
                    self.b.emit(
                        emitter,
                        vec![topic(sig::DYDX_LOG_DEPOSIT), TopicHash(runner.to_word())],
                        dydx_update_data(market, amount, contract),
                    );
                } else {
                    self.b.emit(
                        emitter,
                        vec![topic(sig::DYDX_LOG_WITHDRAW), TopicHash(runner.to_word())],
                        dydx_update_data(market, amount, contract),
                    );
                }
                self.b.transfer(solo, market, contract, amount);
                self.b.begin_call(
                    solo,
                    contract,
                    Some(venue_selector(
                        "callFunction(address,(address,uint256),bytes)",
                    )),
                    Vec::new(),
                    U256::zero(),
                );
                if !wrong_emitter && !broken_order {
                    self.loan_assets.push(market);
                }
                self.open.push(OpenLoan::Dydx {
                    solo,
                    solo_call,
                    asset: market,
                    amount,
                    owner: runner,
                    target: contract,
                    broken_order,
                    wrong_emitter,
                });
                Ok(())
            }
            ScenarioStep::UniV2FlashSwap {
                payback_to_pair,
                empty_data,
            } => {
                let pair_index = self.rng.below(PAIR_POOL as u64) as u8;
                let pair_addr = pair(pair_index);
                let token = asset(pair_index);
                let amount = self.amount();
                let mut payback_to_pair = *payback_to_pair;
                let mut empty_data = *empty_data;
                match mutation {
                    Some(Mutation::EmptyCallbackData) => empty_data = true,
                    Some(Mutation::PaybackElsewhere) => payback_to_pair = false,
                    _ => {}
                }
                let data_arg: Vec<u8> = if empty_data {
                    Vec::new()
                } else {
                    vec![0x02, 0x03]
                };
                let calldata = abi::encode_call(
                    sel(sig::UNIV2_SWAP_SEL),
                    &[
                        Token::Uint(amount),
                        Token::Uint(U256::zero()),
                        Token::Address(contract),
                        Token::Bytes(data_arg.clone()),
                    ],
                );
                let pair_call = self.b.begin_call(
                    contract,
                    pair_addr,
                    Some(sel(sig::UNIV2_SWAP_SEL)),
                    calldata,
                    U256::zero(),
                );
                self.b.transfer(pair_addr, token, contract, amount);
                if empty_data {
                    // ordinary swap: no callback; the event closes the call
                    let last = self.b.transfer(contract, token, pair_addr, amount);
                    let span = Span::new(pair_call, last);
                    self.b.emit(
                        pair_addr,
                        vec![
                            topic(sig::UNIV2_SWAP_EVENT),
                            TopicHash(runner.to_word()),
                            TopicHash(contract.to_word()),
                        ],
                        abi::encode_tokens(&[
                            Token::Uint(amount),
                            Token::Uint(U256::zero()),
                            Token::Uint(U256::zero()),
                            Token::Uint(amount),
                        ]),
                    );
                    self.b.end_call();
                    self.note_exchange(Platform::UniswapV2, runner, span);
                    return Ok(());
                }
                let callback_data = abi::encode_call(
                    crate::identify::SEL_UNISWAP_V2_CALLBACK,
                    &[
                        Token::Address(contract),
                        Token::Uint(amount),
                        Token::Uint(U256::zero()),
                        Token::Bytes(data_arg),
                    ],
                );
                self.b.begin_call(
                    pair_addr,
                    contract,
                    Some(crate::identify::SEL_UNISWAP_V2_CALLBACK),
                    callback_data,
                    U256::zero(),
                );
                if payback_to_pair {
                    self.loan_assets.push(token);
                }
                self.open.push(OpenLoan::UniV2 {
                    pair: pair_addr,
                    pair_call,
                    token,
                    amount,
                    runner,
                    target: contract,
                    payback_to_pair,
                });
                Ok(())
            }
            ScenarioStep::BzxFlashBorrow { on_itoken } => {
                let mut positive = *on_itoken;
                let token_contract = if positive {
                    itoken(self.rng.below(ITOKEN_POOL as u64) as u8)
                } else {
                    unrelated_address(3)
                };
                let selector = if matches!(mutation, Some(Mutation::WrongSelector)) {
                    positive = false;
                    venue_selector("notFlashBorrow(uint256)")
                } else {
                    sel(sig::BZX_FLASH_BORROW_SEL)
                };
                if matches!(mutation, Some(Mutation::WrongEmitter)) {
                    positive = false;
                }
                let token_contract = if matches!(mutation, Some(Mutation::WrongEmitter)) {
                    unrelated_address(4)
                } else {
                    token_contract
                };
                let underlying = asset(2);
                let amount = self.amount();
                let calldata = abi::encode_call(
                    selector,
                    &[
                        Token::Uint(amount),
                        Token::Address(runner),
                        Token::Address(contract),
                        Token::Bytes(b"sig".to_vec()),
                        Token::Bytes(vec![0x04]),
                    ],
                );
                self.b.begin_call(
                    contract,
                    token_contract,
                    Some(selector),
                    calldata,
                    U256::zero(),
                );
                let t_out = self
                    .b
                    .transfer(token_contract, underlying, contract, amount);
                self.b.begin_call(
                    token_contract,
                    contract,
                    Some(venue_selector("borrowCallback(bytes)")),
                    Vec::new(),
                    U256::zero(),
                );
                if positive {
                    self.loan_assets.push(underlying);
                }
                self.open.push(OpenLoan::Bzx {
                    token_contract,
                    asset: underlying,
                    amount,
                    target: contract,
                    t_out,
                    positive,
                });
                Ok(())
            }
            ScenarioStep::Swap {
                platform,
                runner: runner_i,
                asset_in,
                asset_out,
            } => {
                match platform {
                    Platform::UniswapV1
                    | Platform::UniswapV2
                    | Platform::Balancer
                    | Platform::OneInch
                    | Platform::Synthetix
                    | Platform::CurveFi
                    | Platform::Kyber => {}
                    other => {
                        return Err(SynthError::BadScript {
                            step: index,
                            message: format!("{other} is not an exchange platform"),
                        })
                    }
                }
                let trader = runner_eoa(*runner_i);
                let trader_contract = runner_contract(*runner_i);
                let token_in = asset(*asset_in);
                let token_out = asset(*asset_out);
                let amount = self.amount();
                let (venue, hash) = match platform {
                    Platform::UniswapV2 => {
                        (pair(*asset_in % PAIR_POOL), topic(sig::UNIV2_SWAP_EVENT))
                    }
                    Platform::UniswapV1 => {
                        (exchange_venue(platform), topic(sig::UNIV1_TOKEN_PURCHASE))
                    }
                    Platform::Balancer => (exchange_venue(platform), topic(sig::BALANCER_LOG_SWAP)),
                    Platform::OneInch => (exchange_venue(platform), topic(sig::ONEINCH_SWAPPED)),
                    Platform::Synthetix => {
                        (exchange_venue(platform), topic(sig::SYNTHETIX_EXCHANGE))
                    }
                    Platform::CurveFi => {
                        (exchange_venue(platform), topic(sig::CURVE_TOKEN_EXCHANGE))
                    }
                    _ => (exchange_venue(platform), topic(sig::KYBER_EXECUTE_TRADE)),
                };
                let c = self.b.begin_call(
                    trader_contract,
                    venue,
                    Some(venue_selector("trade(address,address,uint256)")),
                    Vec::new(),
                    U256::zero(),
                );
                self.b
                    .transfer_from(venue, token_in, trader_contract, venue, amount);
                let t2 = self.b.transfer(venue, token_out, trader_contract, amount);
                if *platform == Platform::UniswapV2 {
                    self.b.emit(
                        venue,
                        vec![
                            hash,
                            TopicHash(trader.to_word()),
                            TopicHash(trader_contract.to_word()),
                        ],
                        abi::encode_tokens(&[
                            Token::Uint(amount),
                            Token::Uint(U256::zero()),
                            Token::Uint(U256::zero()),
                            Token::Uint(amount),
                        ]),
                    );
                } else {
                    let (topics, data) =
                        canonical_event(hash, trader, trader_contract, token_in, token_out, amount);
                    self.b.emit(venue, topics, data);
                }
                self.b.end_call();
                self.note_exchange(platform.clone(), trader, Span::new(c, t2));
                Ok(())
            }
            ScenarioStep::Borrow { platform, asset: a } => {
                self.lending_step(index, platform, ActionFamily::Borrow, *a)
            }
            ScenarioStep::Repay { platform, asset: a } => {
                self.lending_step(index, platform, ActionFamily::Repay, *a)
            }
            ScenarioStep::Deposit { platform, asset: a } => {
                self.lending_step(index, platform, ActionFamily::Deposit, *a)
            }
            ScenarioStep::Redeem { platform, asset: a } => {
                self.lending_step(index, platform, ActionFamily::Redeem, *a)
            }
            ScenarioStep::MarginMint { with_selector } => {
                let venue = margin_venue();
                let amount = self.amount();
                let selector = if *with_selector {
                    sel(sig::BZX_MINT_WITH_ETHER_SEL_1)
                } else {
                    venue_selector("somethingElse()")
                };
                let c = self.b.begin_call(
                    contract,
                    venue,
                    Some(selector),
                    abi::encode_call(selector, &[Token::Address(contract)]),
                    U256::zero(),
                );
                let t = self
                    .b
                    .transfer_from(venue, asset(3), contract, venue, amount);
                let (topics, data) = canonical_event(
                    topic(sig::BZX_MINT_MARGIN),
                    runner,
                    contract,
                    asset(3),
                    asset(4),
                    amount,
                );
                // margin-trade parameters omit the receiver topic
                self.b.emit(venue, vec![topics[0], topics[1]], data);
                self.b.end_call();
                if *with_selector {
                    self.primitives.push(ExpectedPrimitive {
                        kind: "MarginTrade".to_string(),
                        platform: Platform::Bzx,
                        span: Span::new(c, t),
                    });
                }
                Ok(())
            }
            ScenarioStep::Liquidate { platform } => {
                let hash = match platform {
                    Platform::Aave => topic(sig::AAVE_LIQUIDATION_CALL),
                    Platform::Compound => topic(sig::COMPOUND_LIQUIDATE_BORROW),
                    Platform::Dydx => topic(sig::DYDX_LOG_LIQUIDATE),
                    Platform::Opyn => topic(sig::OPYN_LIQUIDATE),
                    other => {
                        return Err(SynthError::BadScript {
                            step: index,
                            message: format!("{other} is not a liquidation platform"),
                        })
                    }
                };
                let venue = liquidation_venue(platform);
                let seized = asset(5);
                let amount = self.amount();
                let c = self.b.begin_call(
                    contract,
                    venue,
                    Some(venue_selector("liquidate(address,address)")),
                    Vec::new(),
                    U256::zero(),
                );
                let t = self.b.transfer(venue, seized, contract, amount);
                let (topics, data) =
                    canonical_event(hash, runner, contract, seized, seized, amount);
                self.b.emit(venue, topics, data);
                self.b.end_call();
                self.primitives.push(ExpectedPrimitive {
                    kind: "Liquidation".to_string(),
                    platform: platform.clone(),
                    span: Span::new(c, t),
                });
                Ok(())
            }
            ScenarioStep::AntiLiquidation => {
                let emitter = if matches!(mutation, Some(Mutation::WrongEmitter)) {
                    unrelated_address(7)
                } else {
                    defi_saver()
                };
                self.b.begin_call(
                    contract,
                    defi_saver(),
                    Some(venue_selector("executeRepay(address)")),
                    Vec::new(),
                    U256::zero(),
                );
                let (topics, data) = canonical_event(
                    defi_saver_event_hash(),
                    runner,
                    contract,
                    asset(6),
                    asset(6),
                    self.amount(),
                );
                self.b.emit(emitter, topics, data);
                self.b.end_call();
                if !matches!(mutation, Some(Mutation::WrongEmitter)) {
                    self.anti_liquidations.push(runner);
                }
                Ok(())
            }
            ScenarioStep::Noise { transfers } => {
                for _ in 0..*transfers {
                    let from = runner_contract(self.rng.below(RUNNER_POOL as u64) as u8);
                    let to = runner_eoa(self.rng.below(RUNNER_POOL as u64) as u8);
                    if self.rng.chance(50) {
                        self.b.leaf(from, to, None, Vec::new(), U256::from(7u64));
                    } else {
                        let token = asset(self.rng.below(ASSET_POOL as u64) as u8);
                        let amount = self.amount();
                        self.b.transfer(from, token, to, amount);
                    }
                }
                Ok(())
            }
            ScenarioStep::Mutate { .. } | ScenarioStep::Mutated { .. } => unreachable!(),
        }
    }

    fn lending_step(
        &mut self,
        index: usize,
        platform: &Platform,
        family: ActionFamily,
        asset_i: u8,
    ) -> Result<(), SynthError> {
        let contract = self.contract();
        let runner = self.runner();
        let token = asset(asset_i);
        let amount = self.amount();
        let venue = lending_venue(platform, asset_i);
        let c = self.b.begin_call(
            contract,
            venue,
            Some(venue_selector("act(address,uint256)")),
            Vec::new(),
            U256::zero(),
        );
        let t = match family {
            // asset moves out of the venue for borrow/redeem, in for the rest
            ActionFamily::Borrow | ActionFamily::Redeem => {
                self.b.transfer(venue, token, contract, amount)
            }
            ActionFamily::Repay | ActionFamily::Deposit => {
                self.b.transfer_from(venue, token, contract, venue, amount)
            }
        };
        match platform {
            Platform::MakerDao => {
                let (dink, dart) = match family {
                    ActionFamily::Deposit => (
                        abi::signed_word(true, amount),
                        abi::signed_word(true, U256::zero()),
                    ),
                    ActionFamily::Redeem => (
                        abi::signed_word(false, amount),
                        abi::signed_word(true, U256::zero()),
                    ),
                    ActionFamily::Borrow => (
                        abi::signed_word(true, U256::zero()),
                        abi::signed_word(true, amount),
                    ),
                    ActionFamily::Repay => (
                        abi::signed_word(true, U256::zero()),
                        abi::signed_word(false, amount),
                    ),
                };
                let data = {
                    let mut out = Vec::with_capacity(96);
                    out.extend_from_slice(&token.to_word());
                    out.extend_from_slice(&dink);
                    out.extend_from_slice(&dart);
                    out
                };
                self.b.emit(
                    venue,
                    vec![
                        topic(sig::MAKER_FROB_EVENT),
                        TopicHash(runner.to_word()),
                        TopicHash(contract.to_word()),
                    ],
                    data,
                );
            }
            Platform::Aave | Platform::Compound | Platform::Bzx => {
                let hash = match (platform, family) {
                    (Platform::Aave, ActionFamily::Borrow) => sig::AAVE_BORROW,
                    (Platform::Aave, ActionFamily::Repay) => sig::AAVE_REPAY,
                    (Platform::Aave, ActionFamily::Deposit) => sig::AAVE_DEPOSIT,
                    (Platform::Aave, ActionFamily::Redeem) => sig::AAVE_REDEEM_UNDERLYING,
                    (Platform::Compound, ActionFamily::Borrow) => sig::COMPOUND_BORROW,
                    (Platform::Compound, ActionFamily::Repay) => sig::COMPOUND_REPAY_BORROW,
                    (Platform::Compound, ActionFamily::Deposit) => sig::COMPOUND_MINT,
                    (Platform::Compound, ActionFamily::Redeem) => sig::COMPOUND_REDEEM,
                    (Platform::Bzx, ActionFamily::Borrow) => sig::BZX_BORROW,
                    (Platform::Bzx, ActionFamily::Repay) => sig::BZX_REPAY,
                    (Platform::Bzx, ActionFamily::Deposit) => sig::BZX_MINT_LENDING,
                    (Platform::Bzx, ActionFamily::Redeem) => sig::BZX_BURN,
                    _ => unreachable!(),
                };
                let (topics, data) =
                    canonical_event(topic(hash), runner, contract, token, token, amount);
                self.b.emit(venue, topics, data);
            }
            other => {
                return Err(SynthError::BadScript {
                    step: index,
                    message: format!("{other} is not a lending platform"),
                });
            }
        }
        self.b.end_call();
        self.primitives.push(ExpectedPrimitive {
            kind: "LendingBorrowing".to_string(),
            platform: platform.clone(),
            span: Span::new(c, t),
        });
        self.lending_actions.push(LendingAction {
            platform: platform.clone(),
            family,
            asset: token,
        });
        Ok(())
    }

    fn note_exchange(&mut self, platform: Platform, trader: Address, span: Span) {
        self.primitives.push(ExpectedPrimitive {
            kind: "Exchange".to_string(),
            platform,
            span,
        });
        *self.exchanges_by_runner.entry(trader).or_insert(0) += 1;
    }

    fn close_loan(&mut self, loan: OpenLoan) {
        match loan {
            OpenLoan::Aave {
                pool,
                asset,
                amount,
                target,
                t_out,
                wrong_emitter,
            } => {
                self.b.end_call(); // executeOperation
                let t_back = self.b.transfer_from(pool, asset, target, pool, amount);
                let emitter = if wrong_emitter {
                    unrelated_address(8)
                } else {
                    pool
                };
                self.b.emit(
                    emitter,
                    vec![
                        topic(sig::AAVE_FLASHLOAN_EVENT),
                        TopicHash(target.to_word()),
                        TopicHash(asset.to_word()),
                    ],
                    abi::encode_tokens(&[
                        Token::Uint(amount),
                        Token::Uint(amount / 400), // 0.25% fee, informational
                        Token::Uint(U256::zero()),
                        Token::Uint(U256::from(1_600_000_000u64)),
                    ]),
                );
                self.b.end_call(); // flashLoan
                if !wrong_emitter {
                    self.loans.push(ExpectedLoan {
                        provider: Platform::Aave,
                        span: Span::new(t_out, t_back),
                    });
                }
            }
            OpenLoan::Dydx {
                solo,
                solo_call,
                asset,
                amount,
                owner,
                target,
                broken_order,
                wrong_emitter,
            } => {
                self.b.end_call(); // callFunction
                let t_back = self.b.transfer_from(solo, asset, target, solo, amount);
                let emitter = if wrong_emitter {
                    unrelated_address(9)
                } else {
                    solo
                };
                let closing_hash = if broken_order {
                    sig::DYDX_LOG_WITHDRAW
                } else {
                    sig::DYDX_LOG_DEPOSIT
                };
                self.b.emit(
                    emitter,
                    vec![topic(closing_hash), TopicHash(owner.to_word())],
                    dydx_update_data(asset, amount, target),
                );
                self.b.end_call(); // operate
                if !broken_order && !wrong_emitter {
                    self.loans.push(ExpectedLoan {
                        provider: Platform::Dydx,
                        span: Span::new(solo_call, t_back),
                    });
                }
            }
            OpenLoan::UniV2 {
                pair,
                pair_call,
                token,
                amount,
                runner,
                target,
                payback_to_pair,
            } => {
                let payback_receiver = if payback_to_pair {
                    pair
                } else {
                    unrelated_address(2)
                };
                let t_back = self.b.transfer(target, token, payback_receiver, amount);
                self.b.end_call(); // uniswapV2Call
                self.b.emit(
                    pair,
                    vec![
                        topic(sig::UNIV2_SWAP_EVENT),
                        TopicHash(runner.to_word()),
                        TopicHash(target.to_word()),
                    ],
                    abi::encode_tokens(&[
                        Token::Uint(U256::zero()),
                        Token::Uint(amount),
                        Token::Uint(amount),
                        Token::Uint(U256::zero()),
                    ]),
                );
                self.b.end_call(); // swap
                let subtree_end = t_back;
                self.note_exchange(
                    Platform::UniswapV2,
                    runner,
                    Span::new(pair_call, subtree_end),
                );
                if payback_to_pair {
                    self.loans.push(ExpectedLoan {
                        provider: Platform::UniswapV2,
                        span: Span::new(pair_call, t_back),
                    });
                }
            }
            OpenLoan::Bzx {
                token_contract,
                asset,
                amount,
                target,
                t_out,
                positive,
            } => {
                self.b.end_call(); // borrowCallback
                let t_back = self.b.transfer(target, asset, token_contract, amount);
                self.b.end_call(); // flashBorrowToken
                if positive {
                    self.loans.push(ExpectedLoan {
                        provider: Platform::Bzx,
                        span: Span::new(t_out, t_back),
                    });
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// corpus sampling
// ---------------------------------------------------------------------------

/// Draws the scenario for position `index` of a corpus. The distribution
/// keeps every detector's positive case above 5% of the mass and every
/// mutation class above 2%.
pub fn scenario_at(seed: u64, index: u64) -> Scenario {
    let scenario_seed = SplitMix64::new(seed ^ index.wrapping_mul(0x9e3779b97f4a7c15)).next_u64();
    let mut rng = SplitMix64::new(scenario_seed);
    let roll = rng.below(100);
    let runner = rng.below(RUNNER_POOL as u64) as u8;
    let asset_a = rng.below(ASSET_POOL as u64) as u8;
    let asset_b = {
        let b = rng.below(ASSET_POOL as u64) as u8;
        if b == asset_a {
            (b + 1) % ASSET_POOL
        } else {
            b
        }
    };
    let amount = rng.below(1_000_000_000_000) + 1;
    let exchange_platforms = [
        Platform::Kyber,
        Platform::OneInch,
        Platform::Balancer,
        Platform::Synthetix,
        Platform::CurveFi,
        Platform::UniswapV1,
        Platform::UniswapV2,
    ];
    let ex = exchange_platforms[rng.below(7) as usize].clone();
    let ex2 = exchange_platforms[rng.below(7) as usize].clone();
    let lending_platforms = [
        Platform::Aave,
        Platform::Compound,
        Platform::Bzx,
        Platform::MakerDao,
    ];
    let lend = lending_platforms[rng.below(4) as usize].clone();
    let liq_platforms = [
        Platform::Aave,
        Platform::Compound,
        Platform::Dydx,
        Platform::Opyn,
    ];
    let liq = liq_platforms[rng.below(4) as usize].clone();

    let script = match roll {
        // plain loans per provider
        0..=7 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Noise { transfers: 1 },
        ],
        8..=15 => vec![
            ScenarioStep::DydxFlashLoan {
                with_call: rng.chance(50),
            },
            ScenarioStep::Noise { transfers: 1 },
        ],
        16..=23 => vec![ScenarioStep::univ2_flash_swap()],
        24..=29 => vec![ScenarioStep::bzx_flash_borrow()],
        // arbitrage: two trades, same runner
        30..=37 => vec![
            ScenarioStep::DydxFlashLoan { with_call: true },
            ScenarioStep::Swap {
                platform: ex,
                runner,
                asset_in: asset_a,
                asset_out: asset_b,
            },
            ScenarioStep::Swap {
                platform: ex2,
                runner,
                asset_in: asset_b,
                asset_out: asset_a,
            },
        ],
        // single trade, or two trades with distinct runners: no arbitrage
        38..=43 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Swap {
                platform: ex,
                runner,
                asset_in: asset_a,
                asset_out: asset_b,
            },
        ],
        44..=48 => vec![
            ScenarioStep::DydxFlashLoan { with_call: false },
            ScenarioStep::Swap {
                platform: ex,
                runner,
                asset_in: asset_a,
                asset_out: asset_b,
            },
            ScenarioStep::Swap {
                platform: ex2,
                runner: runner.wrapping_add(1) % RUNNER_POOL,
                asset_in: asset_b,
                asset_out: asset_a,
            },
        ],
        // lending & borrowing singles
        49..=54 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Borrow {
                platform: lend.clone(),
                asset: asset_b,
            },
        ],
        // margin trade
        55..=60 => vec![
            ScenarioStep::DydxFlashLoan { with_call: true },
            ScenarioStep::MarginMint {
                with_selector: true,
            },
        ],
        // liquidation
        61..=66 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Liquidate { platform: liq },
        ],
        // anti-liquidation
        67..=72 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::AntiLiquidation,
        ],
        // collateral swap: redeem one collateral, deposit another
        73..=78 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Redeem {
                platform: lend.clone(),
                asset: asset_a,
            },
            ScenarioStep::Deposit {
                platform: lend.clone(),
                asset: asset_b,
            },
        ],
        // loan swap: repay the flash-borrowed asset, borrow a different one
        79..=84 => vec![
            ScenarioStep::AaveFlashLoan {
                asset: asset_a,
                amount,
            },
            ScenarioStep::Repay {
                platform: Platform::Compound,
                asset: asset_a,
            },
            ScenarioStep::Borrow {
                platform: Platform::Compound,
                asset: asset_b,
            },
        ],
        // platform swap: close out on one platform, deposit on another
        85..=89 => vec![
            ScenarioStep::DydxFlashLoan { with_call: false },
            ScenarioStep::Repay {
                platform: Platform::Compound,
                asset: asset_a,
            },
            ScenarioStep::Redeem {
                platform: Platform::Compound,
                asset: asset_b,
            },
            ScenarioStep::Deposit {
                platform: Platform::Aave,
                asset: asset_b,
            },
        ],
        // mutation classes, one per bucket
        90..=91 => vec![ScenarioStep::AaveFlashLoan {
            asset: asset_a,
            amount,
        }
        .mutated(Mutation::WrongEmitter)],
        92..=93 => vec![ScenarioStep::DydxFlashLoan {
            with_call: rng.chance(50),
        }
        .mutated(Mutation::BrokenEventOrder)],
        94..=95 => vec![ScenarioStep::univ2_flash_swap().mutated(Mutation::EmptyCallbackData)],
        96..=97 => vec![ScenarioStep::univ2_flash_swap().mutated(Mutation::PaybackElsewhere)],
        98 => vec![ScenarioStep::bzx_flash_borrow().mutated(Mutation::WrongSelector)],
        _ => vec![ScenarioStep::BzxFlashBorrow { on_itoken: false }],
    };
    Scenario::new(scenario_seed, script)
}

/// Generates `n` scenarios into a corpus with their ground truths;
/// deterministic in `seed`.
pub fn generate_corpus(n: usize, seed: u64) -> (Corpus, Vec<GroundTruth>) {
    let mut bundles = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for i in 0..n {
        let scenario = scenario_at(seed, i as u64);
        let (mut bundle, mut truth) =
            generate(&scenario).expect("sampled scenarios are well-formed");
        // unique, ordered placement within the corpus
        bundle.block_number = 9_000_000 + (i as u64 / 4);
        bundle.tx_index = (i % 4) as u32;
        let mut hash_input = Vec::with_capacity(48);
        hash_input.extend_from_slice(b"synth-corpus-tx");
        hash_input.extend_from_slice(&seed.to_be_bytes());
        hash_input.extend_from_slice(&(i as u64).to_be_bytes());
        bundle.tx_hash = TxHash(abi::keccak256(&hash_input));
        truth.tx_hash = bundle.tx_hash;
        truths.push(truth);
        bundles.push(bundle);
    }
    let corpus = Corpus::from_bundles(bundles).expect("synthetic hashes are unique");
    // corpus order equals generation order by construction
    (corpus, truths)
}
