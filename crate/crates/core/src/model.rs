//! Domain types shared by every stage of the pipeline: addresses, selectors,
//! event topics, call frames, logs and the transaction bundle they form.
//!
//! A [`TransactionBundle`] is one external transaction together with its
//! internal call frames (flattened depth-first, in execution order) and its
//! event logs. All types are immutable after construction and safe to share
//! across worker threads.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use primitive_types::U256;

use crate::abi;

/// Errors produced while parsing or validating domain values.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("{what} must be {expected} bytes, got {got}")]
    WrongLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} is not valid hex: {source}")]
    BadHex {
        what: &'static str,
        source: hex::FromHexError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn parse_fixed<const N: usize>(what: &'static str, text: &str) -> Result<[u8; N], ModelError> {
    let stripped = text.strip_prefix("0x").unwrap_or(text);
    let raw = hex::decode(stripped).map_err(|source| ModelError::BadHex { what, source })?;
    if raw.len() != N {
        return Err(ModelError::WrongLength {
            what,
            expected: N,
            got: raw.len(),
        });
    }
    let mut out = [0u8; N];
    out.copy_from_slice(&raw);
    Ok(out)
}

macro_rules! fixed_bytes_type {
    ($name:ident, $len:expr, $what:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_hex(text: &str) -> Result<Self, ModelError> {
                parse_fixed::<$len>($what, text).map(Self)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            /// Canonical text form: lowercase hex with a `0x` prefix.
            pub fn to_hex(&self) -> String {
                format!("0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                Self::from_hex(&text).map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes_type!(Address, 20, "address");
fixed_bytes_type!(Selector, 4, "selector");
fixed_bytes_type!(TopicHash, 32, "event hash");
fixed_bytes_type!(TxHash, 32, "transaction hash");

impl Address {
    /// Reads an address from the low 20 bytes of a 32-byte ABI word.
    pub fn from_word(word: &[u8; 32]) -> Self {
        let mut out = [0u8; 20];
        out.copy_from_slice(&word[12..]);
        Self(out)
    }

    /// Zero-extends the address into a 32-byte ABI word.
    pub fn to_word(&self) -> [u8; 32] {
        let mut word = [0u8; 32];
        word[12..].copy_from_slice(&self.0);
        word
    }
}

impl TopicHash {
    pub fn to_address(&self) -> Address {
        Address::from_word(&self.0)
    }
}

/// Serde adapter: U256 as a decimal string, exact at full width.
pub mod u256_dec {
    use super::*;

    pub fn serialize<S: Serializer>(value: &U256, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<U256, D::Error> {
        let text = String::deserialize(deserializer)?;
        U256::from_dec_str(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<U256>` as an optional decimal string.
pub mod u256_dec_opt {
    use super::*;

    pub fn serialize<S: Serializer>(
        value: &Option<U256>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => serializer.serialize_some(&v.to_string()),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<U256>, D::Error> {
        let text: Option<String> = Option::deserialize(deserializer)?;
        match text {
            Some(t) => U256::from_dec_str(&t)
                .map(Some)
                .map_err(serde::de::Error::custom),
            None => Ok(None),
        }
    }
}

/// Serde adapter: byte strings as `0x`-prefixed hex.
pub mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(value: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("0x{}", hex::encode(value)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(deserializer)?;
        let stripped = text.strip_prefix("0x").unwrap_or(&text);
        hex::decode(stripped).map_err(serde::de::Error::custom)
    }
}

/// One call frame inside a transaction, in depth-first execution order.
///
/// Plain Ether transfers are frames with no selector and empty calldata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InternalCall {
    /// 0-based position in execution order; the external call is index 0.
    pub index: u32,
    /// Call-tree depth; 0 for the external call, parent depth + 1 for children.
    pub depth: u32,
    pub caller: Address,
    pub callee: Address,
    pub selector: Option<Selector>,
    #[serde(with = "hex_bytes")]
    pub calldata: Vec<u8>,
    #[serde(with = "u256_dec")]
    pub value: U256,
}

/// One event log, positioned against the call stream.
///
/// `after_call_index` is the index of the most recently entered call frame at
/// the moment the log was emitted. A frame that logs before making any child
/// call yields its own index; a frame that logs after a child subtree
/// completes yields the last index inside that subtree. This execution-order
/// linkage is what makes span extraction over internal calls possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventLog {
    pub log_index: u32,
    pub emitter: Address,
    pub topics: Vec<TopicHash>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    pub after_call_index: u32,
}

impl EventLog {
    /// topics[0], the event hash for non-anonymous events.
    pub fn topic0(&self) -> Option<TopicHash> {
        self.topics.first().copied()
    }

    /// Reads the i-th 32-byte word of the data section.
    pub fn data_word(&self, index: usize) -> Option<[u8; 32]> {
        abi::word_at(&self.data, index)
    }
}

/// One external transaction with its internal calls and event logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransactionBundle {
    pub tx_hash: TxHash,
    pub block_number: u64,
    pub tx_index: u32,
    pub sender: Address,
    #[serde(default)]
    pub reverted: bool,
    pub calls: Vec<InternalCall>,
    pub logs: Vec<EventLog>,
}

impl TransactionBundle {
    /// Validates every structural invariant, reporting the first violation
    /// with a field path such as `logs[3].afterCallIndex`.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.calls.is_empty() {
            return Err(ModelError::Invalid {
                path: "calls".into(),
                message: "must contain at least the external call".into(),
            });
        }
        for (i, call) in self.calls.iter().enumerate() {
            if call.index as usize != i {
                return Err(ModelError::Invalid {
                    path: format!("calls[{i}].index"),
                    message: format!("expected {i}, got {}", call.index),
                });
            }
            if i == 0 {
                if call.depth != 0 {
                    return Err(ModelError::Invalid {
                        path: "calls[0].depth".into(),
                        message: "external call must have depth 0".into(),
                    });
                }
            } else {
                let prev = self.calls[i - 1].depth;
                if call.depth == 0 || call.depth > prev + 1 {
                    return Err(ModelError::Invalid {
                        path: format!("calls[{i}].depth"),
                        message: format!(
                            "depth {} does not continue a depth-first walk (previous {})",
                            call.depth, prev
                        ),
                    });
                }
            }
        }
        let mut last_log_index: Option<u32> = None;
        for (i, log) in self.logs.iter().enumerate() {
            if let Some(prev) = last_log_index {
                if log.log_index <= prev {
                    return Err(ModelError::Invalid {
                        path: format!("logs[{i}].logIndex"),
                        message: "log indexes must be strictly increasing".into(),
                    });
                }
            }
            last_log_index = Some(log.log_index);
            if log.after_call_index as usize >= self.calls.len() {
                return Err(ModelError::Invalid {
                    path: format!("logs[{i}].afterCallIndex"),
                    message: format!(
                        "refers to call {} but the bundle has {} calls",
                        log.after_call_index,
                        self.calls.len()
                    ),
                });
            }
            if log.topics.len() > 4 {
                return Err(ModelError::Invalid {
                    path: format!("logs[{i}].topics"),
                    message: "an event log carries at most 4 topics".into(),
                });
            }
        }
        Ok(())
    }

    /// Index of the last call inside `index`'s subtree (the call itself when
    /// it has no children).
    pub fn subtree_end(&self, index: u32) -> u32 {
        let root_depth = self.calls[index as usize].depth;
        let mut end = index;
        for call in &self.calls[index as usize + 1..] {
            if call.depth <= root_depth {
                break;
            }
            end = call.index;
        }
        end
    }

    /// Parent frame of `index`, or `None` for the external call.
    pub fn parent_of(&self, index: u32) -> Option<u32> {
        let depth = self.calls[index as usize].depth;
        if depth == 0 {
            return None;
        }
        self.calls[..index as usize]
            .iter()
            .rev()
            .find(|c| c.depth == depth - 1)
            .map(|c| c.index)
    }

    /// Resolves the call frame a log belongs to: starting from the frame at
    /// `after_call_index`, walks up the ancestor chain to the nearest frame
    /// whose callee is the log's emitter. Returns `None` when the emitter
    /// never appears as a callee on that chain (e.g. delegatecall emissions).
    pub fn emitting_frame(&self, log: &EventLog) -> Option<u32> {
        let mut cursor = Some(log.after_call_index);
        while let Some(idx) = cursor {
            if self.calls[idx as usize].callee == log.emitter {
                return Some(idx);
            }
            cursor = self.parent_of(idx);
        }
        None
    }
}

/// A decoded ERC20 movement observed on a call frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenTransfer {
    pub token: Address,
    pub from: Address,
    pub to: Address,
    pub amount: U256,
}

/// `transfer(address,uint256)`
pub const SEL_TRANSFER: Selector = Selector([0xa9, 0x05, 0x9c, 0xbb]);
/// `transferFrom(address,address,uint256)`
pub const SEL_TRANSFER_FROM: Selector = Selector([0x23, 0xb8, 0x72, 0xdd]);

/// Decodes a call frame as an ERC20 `transfer` or `transferFrom`, if it is
/// one. Total over arbitrary byte strings: malformed calldata under a
/// matching selector yields `None`, never a failure.
pub fn token_transfer_view(call: &InternalCall) -> Option<TokenTransfer> {
    let selector = call.selector?;
    if selector == SEL_TRANSFER {
        let to = abi::arg_address(&call.calldata, 0)?;
        let amount = abi::arg_u256(&call.calldata, 1)?;
        Some(TokenTransfer {
            token: call.callee,
            from: call.caller,
            to,
            amount,
        })
    } else if selector == SEL_TRANSFER_FROM {
        let from = abi::arg_address(&call.calldata, 0)?;
        let to = abi::arg_address(&call.calldata, 1)?;
        let amount = abi::arg_u256(&call.calldata, 2)?;
        Some(TokenTransfer {
            token: call.callee,
            from,
            to,
            amount,
        })
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(n: u8) -> Address {
        Address([n; 20])
    }

    /// Test-local ABI encoder, independent of the `abi` module on purpose.
    fn encode_call(selector: [u8; 4], words: &[[u8; 32]]) -> Vec<u8> {
        let mut out = selector.to_vec();
        for w in words {
            out.extend_from_slice(w);
        }
        out
    }

    fn addr_word(a: Address) -> [u8; 32] {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(a.as_bytes());
        w
    }

    fn amount_word(n: u64) -> [u8; 32] {
        let mut w = [0u8; 32];
        w[24..].copy_from_slice(&n.to_be_bytes());
        w
    }

    fn call_with(
        selector: Option<Selector>,
        caller: Address,
        callee: Address,
        calldata: Vec<u8>,
    ) -> InternalCall {
        InternalCall {
            index: 0,
            depth: 0,
            caller,
            callee,
            selector,
            calldata,
            value: U256::zero(),
        }
    }

    #[test]
    fn address_round_trips_and_normalizes_case() {
        let upper = "0x398EC7346DcD622eDc5ae82352F02bE94C62d119";
        let a = Address::from_hex(upper).unwrap();
        assert_eq!(a.to_hex(), "0x398ec7346dcd622edc5ae82352f02be94c62d119");
        assert_eq!(Address::from_hex(&a.to_hex()).unwrap(), a);
    }

    #[test]
    fn address_rejects_wrong_length() {
        assert_eq!(
            Address::from_hex("0x001122"),
            Err(ModelError::WrongLength {
                what: "address",
                expected: 20,
                got: 3
            })
        );
    }

    #[test]
    fn selector_wants_exactly_four_bytes() {
        assert!(Selector::from_hex("0x5cffe9de").is_ok());
        assert!(matches!(
            Selector::from_hex("0x5cffe9"),
            Err(ModelError::WrongLength { expected: 4, .. })
        ));
    }

    #[test]
    fn transfer_decodes_standard_layout() {
        let token = addr(0xf0);
        let from = addr(0xa1);
        let to = addr(0xb2);
        let calldata = encode_call(SEL_TRANSFER.0, &[addr_word(to), amount_word(100)]);
        let call = call_with(Some(SEL_TRANSFER), from, token, calldata);
        let t = token_transfer_view(&call).unwrap();
        assert_eq!(t.token, token);
        assert_eq!(t.from, from);
        assert_eq!(t.to, to);
        assert_eq!(t.amount, U256::from(100u64));
    }

    #[test]
    fn transfer_from_decodes_all_three_arguments() {
        let a = addr(0x11);
        let b = addr(0x22);
        let calldata = encode_call(
            SEL_TRANSFER_FROM.0,
            &[addr_word(a), addr_word(b), amount_word(7)],
        );
        let call = call_with(Some(SEL_TRANSFER_FROM), addr(0x33), addr(0x44), calldata);
        let t = token_transfer_view(&call).unwrap();
        assert_eq!(t.token, addr(0x44));
        assert_eq!(t.from, a);
        assert_eq!(t.to, b);
        assert_eq!(t.amount, U256::from(7u64));
    }

    #[test]
    fn plain_value_transfer_is_not_a_token_transfer() {
        let call = call_with(None, addr(1), addr(2), Vec::new());
        assert!(token_transfer_view(&call).is_none());
    }

    #[test]
    fn truncated_calldata_under_matching_selector_yields_none() {
        let calldata = encode_call(SEL_TRANSFER.0, &[addr_word(addr(9))]); // missing amount
        let call = call_with(Some(SEL_TRANSFER), addr(1), addr(2), calldata);
        assert!(token_transfer_view(&call).is_none());
    }

    #[test]
    fn subtree_end_covers_descendants_only() {
        let mk = |index: u32, depth: u32| InternalCall {
            index,
            depth,
            caller: addr(1),
            callee: addr(2),
            selector: None,
            calldata: Vec::new(),
            value: U256::zero(),
        };
        let bundle = TransactionBundle {
            tx_hash: TxHash([0; 32]),
            block_number: 1,
            tx_index: 0,
            sender: addr(1),
            reverted: false,
            calls: vec![mk(0, 0), mk(1, 1), mk(2, 2), mk(3, 2), mk(4, 1)],
            logs: Vec::new(),
        };
        assert_eq!(bundle.subtree_end(1), 3);
        assert_eq!(bundle.subtree_end(4), 4);
        assert_eq!(bundle.subtree_end(0), 4);
        assert_eq!(bundle.parent_of(3), Some(1));
        assert_eq!(bundle.parent_of(0), None);
    }

    #[test]
    fn validate_flags_out_of_range_log_reference() {
        let call = InternalCall {
            index: 0,
            depth: 0,
            caller: addr(1),
            callee: addr(2),
            selector: None,
            calldata: Vec::new(),
            value: U256::zero(),
        };
        let bundle = TransactionBundle {
            tx_hash: TxHash([0; 32]),
            block_number: 1,
            tx_index: 0,
            sender: addr(1),
            reverted: false,
            calls: vec![call],
            logs: vec![EventLog {
                log_index: 0,
                emitter: addr(3),
                topics: vec![],
                data: vec![],
                after_call_index: 5,
            }],
        };
        let err = bundle.validate().unwrap_err();
        assert!(err.to_string().contains("logs[0].afterCallIndex"));
    }
}
