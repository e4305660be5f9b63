//! Transaction-trace analysis engine for flash loans on Ethereum.
//!
//! Three phases over a corpus of transaction bundles:
//!
//! 1. [`identify`] finds flash loans per provider (Aave, bZx, dYdX,
//!    UniswapV2 flash swaps) and brackets each loan's internal-call span.
//! 2. [`primitive`] classifies the behaviors executed around them:
//!    exchange, lending & borrowing, margin trade, liquidation.
//! 3. [`advanced`] derives intentions: arbitrage, anti-liquidation, and
//!    collateral/loan/platform swapping.
//!
//! Detection patterns live in a configurable [`registry`]; [`synth`]
//! generates labeled synthetic corpora that serve as the detectors' ground
//! truth; [`report`] aggregates results into distribution and span tables.

pub mod abi;
pub mod advanced;
pub mod golden;
pub mod identify;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod primitive;
pub mod registry;
pub mod report;
pub mod rpc;
pub mod synth;

pub use advanced::{AdvancedBehavior, AdvancedKind};
pub use identify::{Diagnostic, FlashLoanRecord, Span};
pub use ingest::Corpus;
pub use model::{Address, EventLog, InternalCall, Selector, TopicHash, TransactionBundle, TxHash};
pub use primitive::{PrimitiveBehavior, PrimitiveKind};
pub use registry::{PatternRegistry, Platform};
