//! Corpus assembly: loading transaction bundles from fixture files (one JSON
//! document per bundle), writing them back canonically, and discovering
//! UniswapV2 pair contracts from factory creation events.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::abi;
use crate::model::{Address, TransactionBundle, TxHash};
use crate::registry::{Category, Matcher, PatternRegistry, PatternRole};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not a valid bundle document: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: schema violation at {field}: {message}")]
    Schema {
        path: String,
        field: String,
        message: String,
    },
    #[error("duplicate transaction {tx_hash} (seen in {first} and {second})")]
    DuplicateTx {
        tx_hash: TxHash,
        first: String,
        second: String,
    },
}

/// Where a corpus comes from: a single fixture file, a directory of them,
/// or an archive node (by transaction list or block range).
#[derive(Debug, Clone)]
pub enum BundleSource {
    FixtureFile(PathBuf),
    FixtureDir(PathBuf),
    Rpc {
        endpoint: String,
        txs: RpcSelection,
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
pub enum RpcSelection {
    TxHashes(Vec<TxHash>),
    BlockRange { from: u64, to: u64 },
}

/// An ordered set of bundles, sorted by (block number, transaction index).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub bundles: Vec<TransactionBundle>,
}

impl Corpus {
    pub fn from_bundles(mut bundles: Vec<TransactionBundle>) -> Result<Corpus, IngestError> {
        bundles.sort_by_key(|b| (b.block_number, b.tx_index));
        let mut seen: std::collections::BTreeMap<TxHash, usize> = Default::default();
        for (i, bundle) in bundles.iter().enumerate() {
            if let Some(first) = seen.insert(bundle.tx_hash, i) {
                return Err(IngestError::DuplicateTx {
                    tx_hash: bundle.tx_hash,
                    first: format!("bundle #{first}"),
                    second: format!("bundle #{i}"),
                });
            }
        }
        Ok(Corpus { bundles })
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn get(&self, tx_hash: &TxHash) -> Option<&TransactionBundle> {
        self.bundles.iter().find(|b| b.tx_hash == *tx_hash)
    }
}

/// Parses and validates one fixture file.
pub fn load_fixture_file(path: &Path) -> Result<TransactionBundle, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_bundle(&text, &path.display().to_string())
}

pub fn parse_bundle(text: &str, origin: &str) -> Result<TransactionBundle, IngestError> {
    let bundle: TransactionBundle = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    bundle.validate().map_err(|e| match e {
        crate::model::ModelError::Invalid {
            path: field,
            message,
        } => IngestError::Schema {
            path: origin.to_string(),
            field,
            message,
        },
        other => IngestError::Schema {
            path: origin.to_string(),
            field: String::new(),
            message: other.to_string(),
        },
    })?;
    Ok(bundle)
}

/// Loads every `*.json` fixture in a directory (sorted by file name for
/// determinism) into a corpus.
pub fn load_fixture_dir(dir: &Path) -> Result<Corpus, IngestError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| IngestError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|e| e == "json").unwrap_or(false)
                && p.file_name()
                    .map(|n| n != "ground_truth.jsonl" && n != "synth_registry.json")
                    .unwrap_or(true)
        })
        .collect();
    paths.sort();
    let mut bundles = Vec::with_capacity(paths.len());
    for path in &paths {
        bundles.push(load_fixture_file(path)?);
    }
    Corpus::from_bundles(bundles)
}

/// Canonical serialized form of a bundle: pretty JSON plus trailing newline.
/// Writing and re-loading is byte-exact.
pub fn bundle_to_string(bundle: &TransactionBundle) -> String {
    let mut text = serde_json::to_string_pretty(bundle).expect("bundle serializes");
    text.push('\n');
    text
}

pub fn write_fixture_file(dir: &Path, bundle: &TransactionBundle) -> Result<PathBuf, IngestError> {
    let name = format!("{}.json", hex::encode(bundle.tx_hash.as_bytes()));
    let path = dir.join(name);
    std::fs::write(&path, bundle_to_string(bundle)).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

pub fn write_corpus_dir(dir: &Path, corpus: &Corpus) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for bundle in &corpus.bundles {
        write_fixture_file(dir, bundle)?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Rpc(#[from] Box<crate::rpc::RpcError>),
}

/// Assembles a corpus from any source. RPC-sourced bundles are fetched (or
/// served from the cache) per transaction and merged in chain order.
pub fn load_fixtures(source: &BundleSource) -> Result<Corpus, LoadError> {
    match source {
        BundleSource::FixtureFile(path) => {
            let bundle = load_fixture_file(path)?;
            Ok(Corpus::from_bundles(vec![bundle])?)
        }
        BundleSource::FixtureDir(path) => Ok(load_fixture_dir(path)?),
        BundleSource::Rpc {
            endpoint,
            txs,
            cache_dir,
        } => {
            let client = crate::rpc::RpcClient::new(endpoint.clone(), cache_dir.clone());
            let hashes = match txs {
                RpcSelection::TxHashes(hashes) => hashes.clone(),
                RpcSelection::BlockRange { from, to } => {
                    client.block_tx_hashes(*from, *to).map_err(Box::new)?
                }
            };
            let mut bundles = Vec::with_capacity(hashes.len());
            for hash in hashes {
                bundles.push(client.fetch_bundle(hash).map_err(Box::new)?);
            }
            Ok(Corpus::from_bundles(bundles)?)
        }
    }
}

/// Scans the corpus for pair-creation events emitted by the factory and
/// returns the pair addresses decoded from their data sections; the result
/// is also merged into the registry's known-pair set.
///
/// Creation logs from any other emitter are ignored.
pub fn discover_pairs(corpus: &Corpus, registry: &PatternRegistry) -> BTreeSet<Address> {
    let creation_hashes: Vec<_> = registry
        .patterns
        .iter()
        .filter(|p| p.role == PatternRole::Discovery && p.category == Category::FlashLoan)
        .filter_map(|p| match &p.matcher {
            Matcher::EventTopic { hash, .. } => Some(*hash),
            _ => None,
        })
        .collect();
    let factory = registry.book.uniswap_v2_factory;
    let mut pairs = BTreeSet::new();
    for bundle in &corpus.bundles {
        for log in &bundle.logs {
            if log.emitter != factory {
                continue;
            }
            let Some(topic0) = log.topic0() else { continue };
            if !creation_hashes.contains(&topic0) {
                continue;
            }
            // PairCreated(token0 indexed, token1 indexed, pair, allPairsLength)
            if let Some(pair) = abi::data_address(&log.data, 0) {
                pairs.insert(pair);
            }
        }
    }
    registry.book.add_pairs(pairs.iter().copied());
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventLog, InternalCall, TopicHash, U256};
    use crate::registry::{load_default, sig};

    fn tiny_bundle(n: u8) -> TransactionBundle {
        TransactionBundle {
            tx_hash: TxHash([n; 32]),
            block_number: 100 + n as u64,
            tx_index: 0,
            sender: Address([1; 20]),
            reverted: false,
            calls: vec![InternalCall {
                index: 0,
                depth: 0,
                caller: Address([1; 20]),
                callee: Address([2; 20]),
                selector: None,
                calldata: Vec::new(),
                value: U256::zero(),
            }],
            logs: Vec::new(),
        }
    }

    #[test]
    fn empty_dir_yields_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = load_fixture_dir(dir.path()).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn write_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = tiny_bundle(7);
        let path = write_fixture_file(dir.path(), &bundle).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_fixture_file(&path).unwrap();
        assert_eq!(loaded, bundle);
        let rewritten = bundle_to_string(&loaded).into_bytes();
        assert_eq!(first, rewritten);
    }

    #[test]
    fn duplicate_tx_hash_is_rejected() {
        let err = Corpus::from_bundles(vec![tiny_bundle(1), tiny_bundle(1)]).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateTx { .. }));
    }

    #[test]
    fn corpus_sorts_by_block_then_index() {
        let mut a = tiny_bundle(1);
        a.block_number = 5;
        a.tx_index = 2;
        let mut b = tiny_bundle(2);
        b.block_number = 5;
        b.tx_index = 0;
        let mut c = tiny_bundle(3);
        c.block_number = 4;
        c.tx_index = 9;
        let corpus = Corpus::from_bundles(vec![a, b, c]).unwrap();
        let order: Vec<u8> = corpus.bundles.iter().map(|b| b.tx_hash.0[0]).collect();
        assert_eq!(order, [3, 2, 1]);
    }

    #[test]
    fn bad_after_call_index_reports_field_path() {
        let mut bundle = tiny_bundle(1);
        bundle.logs = vec![
            EventLog {
                log_index: 0,
                emitter: Address([2; 20]),
                topics: vec![],
                data: vec![],
                after_call_index: 0,
            },
            EventLog {
                log_index: 1,
                emitter: Address([2; 20]),
                topics: vec![],
                data: vec![],
                after_call_index: 0,
            },
            EventLog {
                log_index: 2,
                emitter: Address([2; 20]),
                topics: vec![],
                data: vec![],
                after_call_index: 0,
            },
            EventLog {
                log_index: 3,
                emitter: Address([2; 20]),
                topics: vec![],
                data: vec![],
                after_call_index: 9,
            },
        ];
        let text = serde_json::to_string(&bundle).unwrap();
        let err = parse_bundle(&text, "fixture.json").unwrap_err();
        match err {
            IngestError::Schema { field, .. } => assert_eq!(field, "logs[3].afterCallIndex"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn discover_pairs_honors_factory_constraint() {
        let registry = load_default();
        let factory = registry.book.uniswap_v2_factory;
        let pair = Address([0xaa; 20]);
        let hash = TopicHash::from_hex(sig::UNIV2_PAIR_CREATED).unwrap();

        let mut with_factory = tiny_bundle(1);
        with_factory.logs = vec![EventLog {
            log_index: 0,
            emitter: factory,
            topics: vec![hash],
            data: crate::abi::encode_tokens(&[
                crate::abi::Token::Address(pair),
                crate::abi::Token::Uint(U256::one()),
            ]),
            after_call_index: 0,
        }];
        let mut wrong_emitter = tiny_bundle(2);
        wrong_emitter.logs = vec![EventLog {
            log_index: 0,
            emitter: Address([0xbb; 20]),
            topics: vec![hash],
            data: crate::abi::encode_tokens(&[
                crate::abi::Token::Address(Address([0xcc; 20])),
                crate::abi::Token::Uint(U256::one()),
            ]),
            after_call_index: 0,
        }];

        let corpus = Corpus::from_bundles(vec![with_factory, wrong_emitter]).unwrap();
        let pairs = discover_pairs(&corpus, &registry);
        assert_eq!(pairs, BTreeSet::from([pair]));
        assert!(registry.book.contains_pair(&pair));

        let empty = discover_pairs(&Corpus::default(), &registry);
        assert!(empty.is_empty());
    }

    #[test]
    fn discover_pairs_is_monotone_in_the_corpus() {
        let hash = TopicHash::from_hex(sig::UNIV2_PAIR_CREATED).unwrap();
        let creation = |n: u8, pair_byte: u8, factory: Address| {
            let mut bundle = tiny_bundle(n);
            bundle.logs = vec![EventLog {
                log_index: 0,
                emitter: factory,
                topics: vec![hash],
                data: crate::abi::encode_tokens(&[
                    crate::abi::Token::Address(Address([pair_byte; 20])),
                    crate::abi::Token::Uint(U256::one()),
                ]),
                after_call_index: 0,
            }];
            bundle
        };
        let registry = load_default();
        let factory = registry.book.uniswap_v2_factory;
        let small = Corpus::from_bundles(vec![creation(1, 0xa1, factory)]).unwrap();
        let large =
            Corpus::from_bundles(vec![creation(1, 0xa1, factory), creation(2, 0xa2, factory)])
                .unwrap();
        let from_small = discover_pairs(&small, &load_default());
        let from_large = discover_pairs(&large, &load_default());
        assert!(from_small.is_subset(&from_large));
        assert_eq!(from_large.len(), 2);
    }
}
