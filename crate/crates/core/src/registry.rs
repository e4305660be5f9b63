//! The detection-pattern catalog: platforms, behavior categories, matchers
//! and parameter-extraction maps, plus the platform address book.
//!
//! The built-in default registry carries one pattern per published
//! signature/event row. A registry file (JSON, see [`RegistryFile`]) can
//! extend or replace the defaults so analysts can add platforms without
//! rebuilding.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::abi;
use crate::model::{Address, Selector, TopicHash};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read registry file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("registry file {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("registry file {path}, patterns[{index}] ({field}): {message}")]
    Field {
        path: String,
        index: usize,
        field: &'static str,
        message: String,
    },
    #[error("duplicate pattern for {platform}/{category:?}: {detail}")]
    DuplicatePattern {
        platform: Platform,
        category: Category,
        detail: String,
    },
    #[error("unknown composite detector {0:?}; known: {1:?}")]
    UnknownComposite(String, &'static [&'static str]),
}

/// DeFi platforms the catalog knows about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Platform {
    Aave,
    Bzx,
    UniswapV1,
    UniswapV2,
    Dydx,
    Balancer,
    OneInch,
    Synthetix,
    CurveFi,
    Kyber,
    Compound,
    MakerDao,
    Opyn,
    DefiSaver,
    Custom(String),
}

impl Platform {
    pub fn name(&self) -> &str {
        match self {
            Platform::Aave => "Aave",
            Platform::Bzx => "bZx",
            Platform::UniswapV1 => "UniswapV1",
            Platform::UniswapV2 => "UniswapV2",
            Platform::Dydx => "dYdX",
            Platform::Balancer => "Balancer",
            Platform::OneInch => "1inch",
            Platform::Synthetix => "Synthetix",
            Platform::CurveFi => "CurveFi",
            Platform::Kyber => "Kyber",
            Platform::Compound => "Compound",
            Platform::MakerDao => "MakerDAO",
            Platform::Opyn => "Opyn",
            Platform::DefiSaver => "DeFiSaver",
            Platform::Custom(name) => name,
        }
    }

    pub fn parse(text: &str) -> Platform {
        match text {
            "Aave" => Platform::Aave,
            "bZx" => Platform::Bzx,
            "UniswapV1" => Platform::UniswapV1,
            "UniswapV2" => Platform::UniswapV2,
            "dYdX" => Platform::Dydx,
            "Balancer" => Platform::Balancer,
            "1inch" => Platform::OneInch,
            "Synthetix" => Platform::Synthetix,
            "CurveFi" => Platform::CurveFi,
            "Kyber" => Platform::Kyber,
            "Compound" => Platform::Compound,
            "MakerDAO" => Platform::MakerDao,
            "Opyn" => Platform::Opyn,
            "DeFiSaver" => Platform::DefiSaver,
            other => Platform::Custom(other.to_string()),
        }
    }

    /// Human label used in span tables. The first Uniswap protocol is simply
    /// called "Uniswap" in trade reports.
    pub fn trade_label(&self) -> &str {
        match self {
            Platform::UniswapV1 => "Uniswap",
            other => other.name(),
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Platform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Platform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Platform::parse(&String::deserialize(deserializer)?))
    }
}

/// Behavior category a pattern detects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    FlashLoan,
    Exchange,
    LendingBorrowing,
    MarginTrade,
    Liquidation,
    AntiLiquidation,
}

/// How a pattern participates in matching.
///
/// `Detect` patterns produce records/behaviors on their own. `Auxiliary`
/// patterns document a second signal for an action whose canonical trigger
/// is another pattern (e.g. a function selector whose success event is the
/// detection signal), so matching them alone must not double-count.
/// `Discovery` patterns feed address discovery (pair/exchange creation
/// events), never behavior output.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum PatternRole {
    #[default]
    Detect,
    Auxiliary,
    Discovery,
}

/// Address constraint on a matcher: a fixed set, or a reference into the
/// registry's address book (so config-supplied sets apply without editing
/// every pattern).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressConstraint {
    Fixed(BTreeSet<Address>),
    Book(BookSet),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookSet {
    AaveLendingPool,
    UniswapV2Factory,
    BzxItokens,
    DydxSoloMargin,
    DefiSaverEmitters,
    KnownPairs,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainStep {
    pub hash: TopicHash,
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Matcher {
    FunctionSelector {
        selector: Selector,
        callee: Option<AddressConstraint>,
    },
    EventTopic {
        hash: TopicHash,
        emitter: Option<AddressConstraint>,
    },
    OrderedEventChain {
        steps: Vec<ChainStep>,
        emitter: Option<AddressConstraint>,
    },
    Composite {
        name: String,
    },
}

/// Behavior parameters a pattern can extract (block number and transaction
/// index always come from the bundle itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Runner,
    Receiver,
    AssetIn,
    AssetOut,
    AmountIn,
}

/// Where a parameter is read from at a match site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamSource {
    /// Indexed event topic position (1-based over topics, 0 is the hash).
    Topic(u8),
    /// 32-byte word offset into the event data section.
    Data(u8),
    /// Static calldata argument position.
    Arg(u8),
    Emitter,
    Caller,
    Callee,
}

impl ParamSource {
    pub fn parse(text: &str) -> Option<ParamSource> {
        match text {
            "emitter" => return Some(ParamSource::Emitter),
            "caller" => return Some(ParamSource::Caller),
            "callee" => return Some(ParamSource::Callee),
            _ => {}
        }
        let (kind, idx) = text.split_once(':')?;
        let idx: u8 = idx.parse().ok()?;
        match kind {
            "topic" => Some(ParamSource::Topic(idx)),
            "data" => Some(ParamSource::Data(idx)),
            "arg" => Some(ParamSource::Arg(idx)),
            _ => None,
        }
    }
}

impl fmt::Display for ParamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSource::Topic(i) => write!(f, "topic:{i}"),
            ParamSource::Data(i) => write!(f, "data:{i}"),
            ParamSource::Arg(i) => write!(f, "arg:{i}"),
            ParamSource::Emitter => f.write_str("emitter"),
            ParamSource::Caller => f.write_str("caller"),
            ParamSource::Callee => f.write_str("callee"),
        }
    }
}

impl Serialize for ParamSource {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ParamSource {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ParamSource::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("bad parameter source {text:?}")))
    }
}

pub type ParameterMap = BTreeMap<Param, ParamSource>;

/// One detection pattern: a platform's named function or event with its
/// matcher and parameter extraction map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub platform: Platform,
    pub category: Category,
    /// Function or event name as published (e.g. "FlashLoan", "frob").
    pub name: String,
    pub role: PatternRole,
    pub matcher: Matcher,
    pub params: ParameterMap,
}

/// Fee metadata per flash-loan provider; informational only, never checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderFee {
    pub platform: Platform,
    pub fee: String,
}

/// Known platform addresses. `known_pairs` is the only mutable member: pair
/// discovery appends concurrently, readers take a snapshot.
#[derive(Debug)]
pub struct AddressBook {
    pub aave_lending_pool: Address,
    pub uniswap_v2_factory: Address,
    pub bzx_itokens: BTreeSet<Address>,
    pub dydx_solo_margin: Address,
    pub defi_saver_emitters: BTreeSet<Address>,
    known_pairs: RwLock<BTreeSet<Address>>,
}

impl AddressBook {
    pub fn known_pairs(&self) -> BTreeSet<Address> {
        self.known_pairs.read().expect("known_pairs lock").clone()
    }

    pub fn contains_pair(&self, address: &Address) -> bool {
        self.known_pairs
            .read()
            .expect("known_pairs lock")
            .contains(address)
    }

    pub fn known_pairs_len(&self) -> usize {
        self.known_pairs.read().expect("known_pairs lock").len()
    }

    /// Appends discovered pairs; the set only ever grows.
    pub fn add_pairs<I: IntoIterator<Item = Address>>(&self, pairs: I) {
        let mut guard = self.known_pairs.write().expect("known_pairs lock");
        guard.extend(pairs);
    }

    pub fn resolve(&self, set: BookSet) -> BTreeSet<Address> {
        match set {
            BookSet::AaveLendingPool => BTreeSet::from([self.aave_lending_pool]),
            BookSet::UniswapV2Factory => BTreeSet::from([self.uniswap_v2_factory]),
            BookSet::BzxItokens => self.bzx_itokens.clone(),
            BookSet::DydxSoloMargin => BTreeSet::from([self.dydx_solo_margin]),
            BookSet::DefiSaverEmitters => self.defi_saver_emitters.clone(),
            BookSet::KnownPairs => self.known_pairs(),
        }
    }

    pub fn constraint_allows(
        &self,
        constraint: &Option<AddressConstraint>,
        addr: &Address,
    ) -> bool {
        match constraint {
            None => true,
            Some(AddressConstraint::Fixed(set)) => set.contains(addr),
            Some(AddressConstraint::Book(book_set)) => self.resolve(*book_set).contains(addr),
        }
    }
}

impl Clone for AddressBook {
    fn clone(&self) -> Self {
        AddressBook {
            aave_lending_pool: self.aave_lending_pool,
            uniswap_v2_factory: self.uniswap_v2_factory,
            bzx_itokens: self.bzx_itokens.clone(),
            dydx_solo_margin: self.dydx_solo_margin,
            defi_saver_emitters: self.defi_saver_emitters.clone(),
            known_pairs: RwLock::new(self.known_pairs()),
        }
    }
}

/// The loaded catalog: ordered patterns plus the address book.
#[derive(Debug, Clone)]
pub struct PatternRegistry {
    pub patterns: Vec<Pattern>,
    pub book: AddressBook,
    pub fees: Vec<ProviderFee>,
}

/// Composite detectors a registry file may reference.
pub const KNOWN_COMPOSITES: &[&str] = &["uniswap_v2_flash_swap"];

pub mod sig {
    //! Published signature and event-hash constants, grouped by category.
    //! Values that follow from a canonical signature are cross-checked by
    //! test against a keccak derivation.

    // flash loan
    pub const AAVE_FLASHLOAN_SEL: &str = "0x5cffe9de";
    pub const AAVE_FLASHLOAN_EVENT: &str =
        "0x5b8f46461c1dd69fb968f1a003acee221ea3e19540e350233b612ddb43433b55";
    pub const BZX_FLASH_BORROW_SEL: &str = "0x66fa576f";
    pub const UNIV2_PAIR_CREATED: &str =
        "0x0d3648bd0f6ba80134a33ba9275ac585d9d315f0ad8355cddefde31afa28d0e9";
    pub const UNIV2_SWAP_SEL: &str = "0x022c0d9f";
    pub const UNIV2_SWAP_EVENT: &str =
        "0xd78ad95fa46c994b6551d0da85fc275fe613ce37657fb8d5e3d130840159d822";
    pub const DYDX_LOG_OPERATE: &str =
        "0x91b01baeee3a24b590d112613814d86801005c7ef9353e7fc1eaeaf33ccf83b0";
    pub const DYDX_LOG_WITHDRAW: &str =
        "0xbc83c08f0b269b1726990c8348ffdf1ae1696244a14868d766e542a2f18cd7d4";
    pub const DYDX_LOG_CALL: &str =
        "0xab38cdc4a831ebe6542bf277d36b65dbc5c66a4d03ec6cf56ac38de05dc30098";
    pub const DYDX_LOG_DEPOSIT: &str =
        "0x2bad8bc95088af2c247b30fa2b2e6a0886f88625e0945cd3051008e0e270198f";

    // exchange
    pub const UNIV1_NEW_EXCHANGE: &str =
        "0x9d42cb017eb05bd8944ab536a8b35bc68085931dd5f4356489801453923953f9";
    pub const UNIV1_TOKEN_PURCHASE: &str =
        "0xcd60aa75dea3072fbc07ae6d7d856b5dc5f4eee88854f5b4abf7b680ef8bc50f";
    pub const UNIV1_ETH_PURCHASE: &str =
        "0x7f4091b46c33e918a0f3aa42307641d17bb67029427a5369e54b353984238705";
    pub const BALANCER_LOG_SWAP: &str =
        "0x908fb5ee8f16c6bc9bc3690973819f32a4d4b10188134543c88706e0e1d43378";
    pub const ONEINCH_SWAP_SEL: &str = "0xf88309d7";
    pub const ONEINCH_SWAPPED: &str =
        "0xe2cee3f6836059820b673943853afebd9b3026125dab0d774284e6f28a4855be";
    pub const SYNTHETIX_EXCHANGE: &str =
        "0xdb1741ffc6844b04a9284bb6337fb0ccfe543a493ef0ac8e725242201e93d4bd";
    pub const CURVE_TOKEN_EXCHANGE: &str =
        "0x8b3e96f2b889fa771c53c981b40daf005f63f637f1869f707052d15a3dd97140";
    pub const KYBER_EXECUTE_TRADE: &str =
        "0x1849bd6a030a1bca28b83437fd3de96f3d27a5d172fa7e9c78e7b61468928a39";
    pub const KYBER_TRADE: &str =
        "0xd30ca399cb43507ecec6a629a35cf45eb98cda550c27696dcb0d8c4a3873ce6c";

    // lending & borrowing
    pub const AAVE_BORROW: &str =
        "0x1e77446728e5558aa1b7e81e0cdab9cc1b075ba893b740600c76a315c2caa553";
    pub const AAVE_REPAY: &str =
        "0xb718f0b14f03d8c3adf35b15e3da52421b042ac879e5a689011a8b1e0036773d";
    pub const AAVE_DEPOSIT: &str =
        "0xc12c57b1c73a2c3a2ea4613e9476abb3d8d146857aab7329e24243fb59710c82";
    pub const AAVE_REDEEM_UNDERLYING: &str =
        "0x9c4ed599cd8555b9c1e8cd7643240d7d71eb76b792948c49fcb4d411f7b6b3c6";
    pub const BZX_BORROW: &str =
        "0x86e15dd78cd784ab7788bcf5b96b9395e86030e048e5faedcfe752c700f6157e";
    pub const BZX_REPAY: &str =
        "0x85dfc0033a3e5b3b9b3151bd779c1f9b855d66b83ff5bb79283b68d82e8e5b73";
    pub const BZX_MINT_LENDING: &str =
        "0xb4c03061fb5b7fed76389d5af8f2e0ddb09f8c70d1333abbb62582835e10accb";
    pub const BZX_BURN: &str = "0x743033787f4738ff4d6a7225ce2bd0977ee5f86b91a902a58f5e4d0b297b4644";
    pub const COMPOUND_BORROW: &str =
        "0x13ed6866d4e1ee6da46f845c46d7e54120883d75c5ea9a2dacc1c4ca8984ab80";
    pub const COMPOUND_REPAY_BORROW: &str =
        "0x1a2a22cb034d26d1854bdc6666a5b91fe25efbbb5dcad3b0355478d6f5c362a1";
    pub const COMPOUND_MINT: &str =
        "0x4c209b5fc8ad50758f13e2e1088ba56a560dff690a1c6fef26394f4c03821c4f";
    pub const COMPOUND_REDEEM: &str =
        "0xe5b754fb1abb7f01b499791d0b820ae3b6af3424ac1c59768edb53f4ec31a929";
    pub const MAKER_FROB_SEL: &str = "0x76088703";
    pub const MAKER_FROB_EVENT: &str =
        "0x7608870300000000000000000000000000000000000000000000000000000000";

    // margin trade
    pub const BZX_MINT_WITH_ETHER_SEL_1: &str = "0x4e07008d";
    pub const BZX_MINT_WITH_ETHER_SEL_2: &str = "0xd24f22a9";
    pub const BZX_MINT_WITH_TOKEN_SEL_1: &str = "0x39039497";
    pub const BZX_MINT_WITH_TOKEN_SEL_2: &str = "0xf5acf904";
    pub const BZX_MINT_MARGIN: &str =
        "0x458f5fa412d0f69b08dd84872b0215675cc67bc1d5b6fd93300a1c3878b86196";

    // liquidation
    pub const AAVE_LIQUIDATION_CALL: &str =
        "0x56864757fd5b1fc9f38f5f3a981cd8ae512ce41b902cf73fc506ee369c6bc237";
    pub const COMPOUND_LIQUIDATE_BORROW: &str =
        "0x196893d3172b176a2d1d257008db8d8d97c8d19c485b21a653c309df6503262f";
    pub const DYDX_LOG_LIQUIDATE: &str =
        "0x1b9e65b359b871d74b1af1fc8b13b11635bfb097c4631b091eb762fda7e67dc7";
    pub const OPYN_LIQUIDATE: &str =
        "0xcab8e1abb9f8235c6db895cf185336dc9461aecf477b98c1be83687ee549e66a";

    // platform addresses
    pub const AAVE_LENDING_POOL_ADDR: &str = "0x398ec7346dcd622edc5ae82352f02be94c62d119";
    pub const UNISWAP_V2_FACTORY_ADDR: &str = "0x5c69bee701ef814a2b6a3edd4b1652cb9cc5aa6f";
    /// dYdX SoloMargin mainnet deployment; not published in the pattern
    /// sources, supplied as an overridable default.
    pub const DYDX_SOLO_MARGIN_ADDR: &str = "0x1e0447b19bb6ecfdae1e4ae1694b0c3659614e4e";
}

fn topic(text: &str) -> TopicHash {
    TopicHash::from_hex(text).expect("built-in event hash")
}

fn selector(text: &str) -> Selector {
    Selector::from_hex(text).expect("built-in selector")
}

fn address(text: &str) -> Address {
    Address::from_hex(text).expect("built-in address")
}

fn params(entries: &[(Param, ParamSource)]) -> ParameterMap {
    entries.iter().cloned().collect()
}

/// Canonical event layout shared by the catalog's behavior events unless a
/// protocol pins something else: `topics = [hash, runner, receiver]`,
/// `data = [asset_in, asset_out, amount_in]`.
fn canonical_event_params(receiver: bool, asset_in: bool) -> ParameterMap {
    let mut map = params(&[
        (Param::Runner, ParamSource::Topic(1)),
        (Param::AssetOut, ParamSource::Data(1)),
        (Param::AmountIn, ParamSource::Data(2)),
    ]);
    if receiver {
        map.insert(Param::Receiver, ParamSource::Topic(2));
    }
    if asset_in {
        map.insert(Param::AssetIn, ParamSource::Data(0));
    }
    map
}

fn event_pattern(
    platform: Platform,
    category: Category,
    name: &str,
    hash: &str,
    emitter: Option<AddressConstraint>,
    map: ParameterMap,
) -> Pattern {
    Pattern {
        platform,
        category,
        name: name.to_string(),
        role: PatternRole::Detect,
        matcher: Matcher::EventTopic {
            hash: topic(hash),
            emitter,
        },
        params: map,
    }
}

fn selector_pattern(
    platform: Platform,
    category: Category,
    name: &str,
    sel: &str,
    role: PatternRole,
    callee: Option<AddressConstraint>,
    map: ParameterMap,
) -> Pattern {
    Pattern {
        platform,
        category,
        name: name.to_string(),
        role,
        matcher: Matcher::FunctionSelector {
            selector: selector(sel),
            callee,
        },
        params: map,
    }
}

/// Builds the registry from the built-in catalog. Deterministic and pure.
pub fn load_default() -> PatternRegistry {
    use Category::*;
    use Platform::*;

    let book = AddressBook {
        aave_lending_pool: address(sig::AAVE_LENDING_POOL_ADDR),
        uniswap_v2_factory: address(sig::UNISWAP_V2_FACTORY_ADDR),
        // iToken addresses are deployment data the catalog does not publish;
        // supplied via registry file before the bZx detector activates.
        bzx_itokens: BTreeSet::new(),
        dydx_solo_margin: address(sig::DYDX_SOLO_MARGIN_ADDR),
        defi_saver_emitters: BTreeSet::new(),
        known_pairs: RwLock::new(BTreeSet::new()),
    };

    let mut patterns = Vec::new();

    // --- flash loan ---
    patterns.push(event_pattern(
        Aave,
        FlashLoan,
        "FlashLoan",
        sig::AAVE_FLASHLOAN_EVENT,
        Some(AddressConstraint::Book(BookSet::AaveLendingPool)),
        // FlashLoan(_target indexed, _reserve indexed, _amount, fees...)
        params(&[
            (Param::Runner, ParamSource::Topic(1)),
            (Param::AssetOut, ParamSource::Topic(2)),
            (Param::AssetIn, ParamSource::Topic(2)),
            (Param::AmountIn, ParamSource::Data(0)),
        ]),
    ));
    patterns.push(selector_pattern(
        Aave,
        FlashLoan,
        "flashLoan",
        sig::AAVE_FLASHLOAN_SEL,
        PatternRole::Auxiliary,
        Some(AddressConstraint::Book(BookSet::AaveLendingPool)),
        // flashLoan(_receiver, _reserve, _amount, _params)
        params(&[
            (Param::Runner, ParamSource::Arg(0)),
            (Param::AssetOut, ParamSource::Arg(1)),
            (Param::AmountIn, ParamSource::Arg(2)),
        ]),
    ));
    patterns.push(selector_pattern(
        Bzx,
        FlashLoan,
        "flashBorrowToken",
        sig::BZX_FLASH_BORROW_SEL,
        PatternRole::Detect,
        Some(AddressConstraint::Book(BookSet::BzxItokens)),
        // flashBorrowToken(borrowAmount, borrower, target, signature, data)
        params(&[
            (Param::AmountIn, ParamSource::Arg(0)),
            (Param::Runner, ParamSource::Arg(1)),
            (Param::AssetOut, ParamSource::Callee),
            (Param::AssetIn, ParamSource::Callee),
        ]),
    ));
    let mut pair_created = event_pattern(
        UniswapV2,
        FlashLoan,
        "PairCreated",
        sig::UNIV2_PAIR_CREATED,
        Some(AddressConstraint::Book(BookSet::UniswapV2Factory)),
        ParameterMap::new(),
    );
    pair_created.role = PatternRole::Discovery;
    patterns.push(pair_created);
    patterns.push(selector_pattern(
        UniswapV2,
        FlashLoan,
        "swap",
        sig::UNIV2_SWAP_SEL,
        PatternRole::Auxiliary,
        Some(AddressConstraint::Book(BookSet::KnownPairs)),
        // swap(amount0Out, amount1Out, to, data)
        params(&[(Param::Runner, ParamSource::Arg(2))]),
    ));
    patterns.push(Pattern {
        platform: UniswapV2,
        category: FlashLoan,
        name: "flash swap".to_string(),
        role: PatternRole::Detect,
        matcher: Matcher::Composite {
            name: "uniswap_v2_flash_swap".to_string(),
        },
        params: ParameterMap::new(),
    });
    patterns.push(Pattern {
        platform: Dydx,
        category: FlashLoan,
        name: "operate flow".to_string(),
        role: PatternRole::Detect,
        matcher: Matcher::OrderedEventChain {
            steps: vec![
                ChainStep {
                    hash: topic(sig::DYDX_LOG_OPERATE),
                    optional: false,
                },
                ChainStep {
                    hash: topic(sig::DYDX_LOG_CALL),
                    optional: true,
                },
                ChainStep {
                    hash: topic(sig::DYDX_LOG_WITHDRAW),
                    optional: false,
                },
                ChainStep {
                    hash: topic(sig::DYDX_LOG_DEPOSIT),
                    optional: false,
                },
            ],
            emitter: Some(AddressConstraint::Book(BookSet::DydxSoloMargin)),
        },
        // Applied to the LogWithdraw step; data words follow the published
        // layout [accountNumber, market, deltaSign, deltaValue, ...], with
        // the market word carrying the asset identity.
        params: params(&[
            (Param::Runner, ParamSource::Topic(1)),
            (Param::AssetOut, ParamSource::Data(1)),
            (Param::AmountIn, ParamSource::Data(3)),
        ]),
    });

    // --- exchange ---
    let mut new_exchange = event_pattern(
        UniswapV1,
        Exchange,
        "NewExchange",
        sig::UNIV1_NEW_EXCHANGE,
        None,
        ParameterMap::new(),
    );
    new_exchange.role = PatternRole::Discovery;
    patterns.push(new_exchange);
    patterns.push(event_pattern(
        UniswapV1,
        Exchange,
        "TokenPurchase",
        sig::UNIV1_TOKEN_PURCHASE,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        UniswapV1,
        Exchange,
        "EthPurchase",
        sig::UNIV1_ETH_PURCHASE,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        UniswapV2,
        Exchange,
        "Swap",
        sig::UNIV2_SWAP_EVENT,
        None,
        // Swap(sender indexed, to indexed, amounts...); the pair contract
        // stands in for the traded assets, which the event does not carry.
        params(&[
            (Param::Runner, ParamSource::Topic(1)),
            (Param::Receiver, ParamSource::Topic(2)),
            (Param::AssetIn, ParamSource::Emitter),
            (Param::AssetOut, ParamSource::Emitter),
            (Param::AmountIn, ParamSource::Data(0)),
        ]),
    ));
    patterns.push(event_pattern(
        Balancer,
        Exchange,
        "LOG_SWAP",
        sig::BALANCER_LOG_SWAP,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(selector_pattern(
        OneInch,
        Exchange,
        "swap",
        sig::ONEINCH_SWAP_SEL,
        PatternRole::Auxiliary,
        None,
        ParameterMap::new(),
    ));
    patterns.push(event_pattern(
        OneInch,
        Exchange,
        "Swapped",
        sig::ONEINCH_SWAPPED,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        Synthetix,
        Exchange,
        "Exchange",
        sig::SYNTHETIX_EXCHANGE,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        CurveFi,
        Exchange,
        "TokenExchange",
        sig::CURVE_TOKEN_EXCHANGE,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        Kyber,
        Exchange,
        "ExecuteTrade",
        sig::KYBER_EXECUTE_TRADE,
        None,
        canonical_event_params(true, true),
    ));
    patterns.push(event_pattern(
        Kyber,
        Exchange,
        "KyberTrade",
        sig::KYBER_TRADE,
        None,
        canonical_event_params(true, true),
    ));

    // --- lending & borrowing ---
    for (name, hash) in [
        ("Borrow", sig::AAVE_BORROW),
        ("Repay", sig::AAVE_REPAY),
        ("Deposit", sig::AAVE_DEPOSIT),
        ("RedeemUnderlying", sig::AAVE_REDEEM_UNDERLYING),
    ] {
        patterns.push(event_pattern(
            Aave,
            LendingBorrowing,
            name,
            hash,
            None,
            canonical_event_params(true, true),
        ));
    }
    for (name, hash) in [
        ("Borrow", sig::BZX_BORROW),
        ("Repay", sig::BZX_REPAY),
        ("Mint", sig::BZX_MINT_LENDING),
        ("Burn", sig::BZX_BURN),
    ] {
        patterns.push(event_pattern(
            Bzx,
            LendingBorrowing,
            name,
            hash,
            None,
            canonical_event_params(true, true),
        ));
    }
    for (name, hash) in [
        ("Borrow", sig::COMPOUND_BORROW),
        ("RepayBorrow", sig::COMPOUND_REPAY_BORROW),
        ("Mint", sig::COMPOUND_MINT),
        ("Redeem", sig::COMPOUND_REDEEM),
    ] {
        patterns.push(event_pattern(
            Compound,
            LendingBorrowing,
            name,
            hash,
            None,
            canonical_event_params(true, true),
        ));
    }
    patterns.push(selector_pattern(
        MakerDao,
        LendingBorrowing,
        "frob",
        sig::MAKER_FROB_SEL,
        PatternRole::Auxiliary,
        None,
        ParameterMap::new(),
    ));
    patterns.push(event_pattern(
        MakerDao,
        LendingBorrowing,
        "frob",
        sig::MAKER_FROB_EVENT,
        None,
        // Anonymous note event, topics[0] = padded selector; data words are
        // [ilk, dink, dart] with signed collateral/debt deltas. The amount is
        // sign-dependent, recovered by the classifier rather than mapped.
        params(&[
            (Param::Runner, ParamSource::Topic(1)),
            (Param::Receiver, ParamSource::Topic(2)),
            (Param::AssetIn, ParamSource::Data(0)),
            (Param::AssetOut, ParamSource::Data(0)),
        ]),
    ));

    // --- margin trade ---
    for (name, sel) in [
        ("MintWithEther", sig::BZX_MINT_WITH_ETHER_SEL_1),
        ("MintWithEther", sig::BZX_MINT_WITH_ETHER_SEL_2),
        ("MintWithToken", sig::BZX_MINT_WITH_TOKEN_SEL_1),
        ("MintWithToken", sig::BZX_MINT_WITH_TOKEN_SEL_2),
    ] {
        patterns.push(selector_pattern(
            Bzx,
            MarginTrade,
            name,
            sel,
            PatternRole::Detect,
            None,
            ParameterMap::new(),
        ));
    }
    patterns.push(event_pattern(
        Bzx,
        MarginTrade,
        "Mint",
        sig::BZX_MINT_MARGIN,
        None,
        params(&[
            (Param::Runner, ParamSource::Topic(1)),
            (Param::AssetIn, ParamSource::Data(0)),
            (Param::AssetOut, ParamSource::Data(1)),
            (Param::AmountIn, ParamSource::Data(2)),
        ]),
    ));

    // --- liquidation ---
    for (platform, name, hash) in [
        (Aave, "LiquidationCall", sig::AAVE_LIQUIDATION_CALL),
        (Compound, "LiquidateBorrow", sig::COMPOUND_LIQUIDATE_BORROW),
        (Dydx, "LogLiquidate", sig::DYDX_LOG_LIQUIDATE),
        (Opyn, "Liquidate", sig::OPYN_LIQUIDATE),
    ] {
        patterns.push(event_pattern(
            platform,
            Liquidation,
            name,
            hash,
            None,
            canonical_event_params(true, false),
        ));
    }

    // No default anti-liquidation pattern ships: the monitoring service's
    // event hash is not published, so it must arrive via registry file.

    let fees = vec![
        ProviderFee {
            platform: Aave,
            fee: "0.25% of the borrowed asset".to_string(),
        },
        ProviderFee {
            platform: Bzx,
            fee: "none beyond transaction gas".to_string(),
        },
        ProviderFee {
            platform: UniswapV2,
            fee: "0.3% of the borrowed asset".to_string(),
        },
        ProviderFee {
            platform: Dydx,
            fee: "none beyond transaction gas".to_string(),
        },
    ];

    PatternRegistry {
        patterns,
        book,
        fees,
    }
}

impl PatternRegistry {
    /// All patterns for a platform/category pair, in load order.
    pub fn find(&self, platform: &Platform, category: Category) -> Vec<&Pattern> {
        self.patterns
            .iter()
            .filter(|p| p.platform == *platform && p.category == category)
            .collect()
    }

    pub fn find_category(&self, category: Category) -> Vec<&Pattern> {
        self.patterns
            .iter()
            .filter(|p| p.category == category)
            .collect()
    }

    /// Distinct platforms providing a category, in first-seen order.
    pub fn platforms_of(&self, category: Category) -> Vec<Platform> {
        let mut seen = Vec::new();
        for p in self.patterns.iter().filter(|p| p.category == category) {
            if !seen.contains(&p.platform) {
                seen.push(p.platform.clone());
            }
        }
        seen
    }

    /// Content digest over the canonical serialized form; recorded in result
    /// manifests so stale outputs are detected on load.
    pub fn checksum(&self) -> String {
        let file = RegistryFile::snapshot(self);
        let json = serde_json::to_string(&file).expect("registry serializes");
        format!("0x{}", hex::encode(abi::keccak256(json.as_bytes())))
    }
}

// ---------------------------------------------------------------------------
// file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    #[default]
    Extend,
    Replace,
}

/// Normative JSON rendering of a registry. `mode: extend` merges into the
/// defaults; `mode: replace` starts from an empty catalog.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RegistryFile {
    #[serde(default)]
    pub mode: LoadMode,
    #[serde(default)]
    pub patterns: Vec<PatternSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address_book: Option<AddressBookSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fees: Vec<ProviderFee>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternSpec {
    pub platform: Platform,
    pub category: Category,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "is_default_role")]
    pub role: PatternRole,
    pub matcher_kind: MatcherKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<ChainStepSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter: Option<AddressConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callee: Option<AddressConstraint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameter_map: BTreeMap<Param, ParamSource>,
}

fn is_default_role(role: &PatternRole) -> bool {
    *role == PatternRole::Detect
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainStepSpec {
    pub event_hash: String,
    #[serde(default)]
    pub optional: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AddressBookSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aave_lending_pool: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniswap_v2_factory: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dydx_solo_margin: Option<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bzx_itokens: Vec<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub defi_saver_emitters: Vec<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub known_pairs: Vec<Address>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    FunctionSelector,
    EventTopic,
    OrderedEventChain,
    Composite,
}

impl RegistryFile {
    /// Serializes a loaded registry as a `replace`-mode file; reloading it
    /// reproduces the registry exactly.
    pub fn snapshot(registry: &PatternRegistry) -> RegistryFile {
        let patterns = registry
            .patterns
            .iter()
            .map(|p| {
                let (matcher_kind, selector, event_hash, chain, composite_name, emitter, callee) =
                    match &p.matcher {
                        Matcher::FunctionSelector { selector, callee } => (
                            MatcherKind::FunctionSelector,
                            Some(selector.to_hex()),
                            None,
                            None,
                            None,
                            None,
                            callee.clone(),
                        ),
                        Matcher::EventTopic { hash, emitter } => (
                            MatcherKind::EventTopic,
                            None,
                            Some(hash.to_hex()),
                            None,
                            None,
                            emitter.clone(),
                            None,
                        ),
                        Matcher::OrderedEventChain { steps, emitter } => (
                            MatcherKind::OrderedEventChain,
                            None,
                            None,
                            Some(
                                steps
                                    .iter()
                                    .map(|s| ChainStepSpec {
                                        event_hash: s.hash.to_hex(),
                                        optional: s.optional,
                                    })
                                    .collect(),
                            ),
                            None,
                            emitter.clone(),
                            None,
                        ),
                        Matcher::Composite { name } => (
                            MatcherKind::Composite,
                            None,
                            None,
                            None,
                            Some(name.clone()),
                            None,
                            None,
                        ),
                    };
                PatternSpec {
                    platform: p.platform.clone(),
                    category: p.category,
                    name: p.name.clone(),
                    role: p.role,
                    matcher_kind,
                    selector,
                    event_hash,
                    chain,
                    composite_name,
                    emitter,
                    callee,
                    parameter_map: p.params.clone(),
                }
            })
            .collect();
        RegistryFile {
            mode: LoadMode::Replace,
            patterns,
            address_book: Some(AddressBookSpec {
                aave_lending_pool: Some(registry.book.aave_lending_pool),
                uniswap_v2_factory: Some(registry.book.uniswap_v2_factory),
                dydx_solo_margin: Some(registry.book.dydx_solo_margin),
                bzx_itokens: registry.book.bzx_itokens.iter().copied().collect(),
                defi_saver_emitters: registry.book.defi_saver_emitters.iter().copied().collect(),
                known_pairs: registry.book.known_pairs().iter().copied().collect(),
            }),
            fees: registry.fees.clone(),
        }
    }
}

fn build_pattern(spec: &PatternSpec, index: usize, path: &str) -> Result<Pattern, RegistryError> {
    let field_err = |field: &'static str, message: String| RegistryError::Field {
        path: path.to_string(),
        index,
        field,
        message,
    };
    let matcher = match spec.matcher_kind {
        MatcherKind::FunctionSelector => {
            let text = spec
                .selector
                .as_deref()
                .ok_or_else(|| field_err("selector", "missing for function_selector".into()))?;
            let sel = Selector::from_hex(text)
                .map_err(|e| field_err("selector", format!("selector must be 4 bytes ({e})")))?;
            Matcher::FunctionSelector {
                selector: sel,
                callee: spec.callee.clone(),
            }
        }
        MatcherKind::EventTopic => {
            let text = spec
                .event_hash
                .as_deref()
                .ok_or_else(|| field_err("event_hash", "missing for event_topic".into()))?;
            let hash = TopicHash::from_hex(text).map_err(|e| {
                field_err("event_hash", format!("event hash must be 32 bytes ({e})"))
            })?;
            Matcher::EventTopic {
                hash,
                emitter: spec.emitter.clone(),
            }
        }
        MatcherKind::OrderedEventChain => {
            let steps_spec = spec
                .chain
                .as_ref()
                .ok_or_else(|| field_err("chain", "missing for ordered_event_chain".into()))?;
            if steps_spec.len() < 2 {
                return Err(field_err("chain", "a chain needs at least 2 steps".into()));
            }
            if steps_spec.iter().filter(|s| s.optional).count() > 1 {
                return Err(field_err(
                    "chain",
                    "at most one step may be optional".into(),
                ));
            }
            let mut steps = Vec::with_capacity(steps_spec.len());
            for s in steps_spec {
                let hash = TopicHash::from_hex(&s.event_hash).map_err(|e| {
                    field_err("chain", format!("event hash must be 32 bytes ({e})"))
                })?;
                steps.push(ChainStep {
                    hash,
                    optional: s.optional,
                });
            }
            Matcher::OrderedEventChain {
                steps,
                emitter: spec.emitter.clone(),
            }
        }
        MatcherKind::Composite => {
            let name = spec
                .composite_name
                .as_deref()
                .ok_or_else(|| field_err("composite_name", "missing for composite".into()))?;
            if !KNOWN_COMPOSITES.contains(&name) {
                return Err(RegistryError::UnknownComposite(
                    name.to_string(),
                    KNOWN_COMPOSITES,
                ));
            }
            Matcher::Composite {
                name: name.to_string(),
            }
        }
    };
    Ok(Pattern {
        platform: spec.platform.clone(),
        category: spec.category,
        name: spec.name.clone(),
        role: spec.role,
        matcher,
        params: spec.parameter_map.clone(),
    })
}

fn apply_book_spec(book: &mut AddressBook, spec: &AddressBookSpec) {
    if let Some(a) = spec.aave_lending_pool {
        book.aave_lending_pool = a;
    }
    if let Some(a) = spec.uniswap_v2_factory {
        book.uniswap_v2_factory = a;
    }
    if let Some(a) = spec.dydx_solo_margin {
        book.dydx_solo_margin = a;
    }
    book.bzx_itokens.extend(spec.bzx_itokens.iter().copied());
    book.defi_saver_emitters
        .extend(spec.defi_saver_emitters.iter().copied());
    book.add_pairs(spec.known_pairs.iter().copied());
}

fn check_duplicates(patterns: &[Pattern]) -> Result<(), RegistryError> {
    for (i, a) in patterns.iter().enumerate() {
        for b in &patterns[i + 1..] {
            if a.platform == b.platform && a.category == b.category && a.matcher == b.matcher {
                return Err(RegistryError::DuplicatePattern {
                    platform: a.platform.clone(),
                    category: a.category,
                    detail: format!("matcher {:?} appears twice", a.matcher),
                });
            }
        }
    }
    Ok(())
}

/// Parses a registry file and merges it with (or replaces) the defaults.
pub fn load_from_file(path: &Path) -> Result<PatternRegistry, RegistryError> {
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_from_str(&text, &path.display().to_string())
}

pub fn load_from_str(text: &str, path: &str) -> Result<PatternRegistry, RegistryError> {
    let file: RegistryFile = serde_json::from_str(text).map_err(|e| RegistryError::Parse {
        path: path.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;

    let mut registry = match file.mode {
        LoadMode::Extend => load_default(),
        LoadMode::Replace => PatternRegistry {
            patterns: Vec::new(),
            book: AddressBook {
                aave_lending_pool: address(sig::AAVE_LENDING_POOL_ADDR),
                uniswap_v2_factory: address(sig::UNISWAP_V2_FACTORY_ADDR),
                bzx_itokens: BTreeSet::new(),
                dydx_solo_margin: address(sig::DYDX_SOLO_MARGIN_ADDR),
                defi_saver_emitters: BTreeSet::new(),
                known_pairs: RwLock::new(BTreeSet::new()),
            },
            fees: Vec::new(),
        },
    };

    for (index, spec) in file.patterns.iter().enumerate() {
        let pattern = build_pattern(spec, index, path)?;
        registry.patterns.push(pattern);
    }
    if let Some(book_spec) = &file.address_book {
        apply_book_spec(&mut registry.book, book_spec);
    }
    registry.fees.extend(file.fees.iter().cloned());
    check_duplicates(&registry.patterns)?;
    Ok(registry)
}

/// Serializes the registry to its canonical file form.
pub fn save_to_string(registry: &PatternRegistry) -> String {
    let file = RegistryFile::snapshot(registry);
    let mut text = serde_json::to_string_pretty(&file).expect("registry serializes");
    text.push('\n');
    text
}
