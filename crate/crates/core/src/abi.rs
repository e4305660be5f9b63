//! Minimal ABI word codec: enough to read static arguments out of calldata
//! and event data, and to build well-formed payloads for synthetic fixtures.
//!
//! Dynamic types are handled only as far as the detectors need them: a
//! `bytes`/`string` argument is resolved through its offset word to recover
//! its length and content.

use crate::model::{Address, Selector, U256};

pub const WORD: usize = 32;

/// The i-th 32-byte word of a data section (no selector).
pub fn word_at(data: &[u8], index: usize) -> Option<[u8; 32]> {
    let start = index.checked_mul(WORD)?;
    let end = start.checked_add(WORD)?;
    if end > data.len() {
        return None;
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&data[start..end]);
    Some(out)
}

/// Static argument word `index` of calldata (skipping the 4-byte selector).
pub fn arg_word(calldata: &[u8], index: usize) -> Option<[u8; 32]> {
    if calldata.len() < 4 {
        return None;
    }
    word_at(&calldata[4..], index)
}

pub fn arg_address(calldata: &[u8], index: usize) -> Option<Address> {
    arg_word(calldata, index).map(|w| Address::from_word(&w))
}

pub fn arg_u256(calldata: &[u8], index: usize) -> Option<U256> {
    arg_word(calldata, index).map(|w| U256::from_big_endian(&w))
}

pub fn data_address(data: &[u8], index: usize) -> Option<Address> {
    word_at(data, index).map(|w| Address::from_word(&w))
}

pub fn data_u256(data: &[u8], index: usize) -> Option<U256> {
    word_at(data, index).map(|w| U256::from_big_endian(&w))
}

/// Resolves a dynamic `bytes`/`string` argument: reads the offset word at
/// argument position `index`, then the length word it points at, and returns
/// the content slice. `None` on any out-of-bounds step.
pub fn arg_dynamic_bytes(calldata: &[u8], index: usize) -> Option<Vec<u8>> {
    let offset = arg_u256(calldata, index)?;
    if offset > U256::from(usize::MAX as u64) {
        return None;
    }
    let offset = offset.as_usize();
    let body = &calldata[4..];
    let len_word = word_at(body, offset / WORD)?;
    if offset % WORD != 0 {
        return None;
    }
    let len = U256::from_big_endian(&len_word);
    if len > U256::from(usize::MAX as u64) {
        return None;
    }
    let len = len.as_usize();
    let start = offset.checked_add(WORD)?;
    let end = start.checked_add(len)?;
    if end > body.len() {
        return None;
    }
    Some(body[start..end].to_vec())
}

/// Interprets a word as a two's-complement signed 256-bit value, returning
/// its sign and magnitude.
pub fn word_as_signed(word: &[u8; 32]) -> (bool, U256) {
    let raw = U256::from_big_endian(word);
    if word[0] & 0x80 != 0 {
        // negative: magnitude = 2^256 - raw
        let magnitude = (!raw).overflowing_add(U256::one()).0;
        (false, magnitude)
    } else {
        (true, raw)
    }
}

// --- encoding helpers, used by the synthetic generator ---

pub fn u256_word(value: U256) -> [u8; 32] {
    value.to_big_endian()
}

pub fn signed_word(positive: bool, magnitude: U256) -> [u8; 32] {
    if positive || magnitude.is_zero() {
        u256_word(magnitude)
    } else {
        u256_word((!magnitude).overflowing_add(U256::one()).0)
    }
}

/// One static tuple or head value while encoding.
pub enum Token {
    Address(Address),
    Uint(U256),
    Word([u8; 32]),
    /// Dynamic bytes/string, placed in the tail with an offset head word.
    Bytes(Vec<u8>),
}

/// Standard head/tail ABI encoding of the given tokens (no selector).
pub fn encode_tokens(tokens: &[Token]) -> Vec<u8> {
    let head_len = tokens.len() * WORD;
    let mut head = Vec::with_capacity(head_len);
    let mut tail: Vec<u8> = Vec::new();
    for token in tokens {
        match token {
            Token::Address(a) => head.extend_from_slice(&a.to_word()),
            Token::Uint(v) => head.extend_from_slice(&u256_word(*v)),
            Token::Word(w) => head.extend_from_slice(w),
            Token::Bytes(content) => {
                let offset = head_len + tail.len();
                head.extend_from_slice(&u256_word(U256::from(offset)));
                tail.extend_from_slice(&u256_word(U256::from(content.len())));
                tail.extend_from_slice(content);
                let pad = (WORD - content.len() % WORD) % WORD;
                tail.resize(tail.len() + pad, 0u8);
            }
        }
    }
    head.extend_from_slice(&tail);
    head
}

/// Calldata for a function call: selector followed by encoded arguments.
pub fn encode_call(selector: Selector, tokens: &[Token]) -> Vec<u8> {
    let mut out = selector.0.to_vec();
    out.extend_from_slice(&encode_tokens(tokens));
    out
}

/// keccak256, used for signature cross-checks and content digests.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    use tiny_keccak::{Hasher, Keccak};
    let mut hasher = Keccak::v256();
    hasher.update(data);
    let mut out = [0u8; 32];
    hasher.finalize(&mut out);
    out
}

/// First four bytes of keccak256 of a canonical signature string.
pub fn selector_of(signature: &str) -> Selector {
    let digest = keccak256(signature.as_bytes());
    Selector([digest[0], digest[1], digest[2], digest[3]])
}

/// Event hash of a canonical signature string.
pub fn event_hash_of(signature: &str) -> crate::model::TopicHash {
    crate::model::TopicHash(keccak256(signature.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamic_bytes_round_trip() {
        let payload = b"hello flash".to_vec();
        let calldata = encode_call(
            Selector([1, 2, 3, 4]),
            &[
                Token::Uint(U256::from(42u64)),
                Token::Bytes(payload.clone()),
                Token::Address(Address([9u8; 20])),
            ],
        );
        assert_eq!(arg_u256(&calldata, 0), Some(U256::from(42u64)));
        assert_eq!(arg_dynamic_bytes(&calldata, 1).unwrap(), payload);
        assert_eq!(arg_address(&calldata, 2), Some(Address([9u8; 20])));
    }

    #[test]
    fn empty_dynamic_bytes_have_zero_length() {
        let calldata = encode_call(Selector([0; 4]), &[Token::Bytes(Vec::new())]);
        assert_eq!(arg_dynamic_bytes(&calldata, 0).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn signed_words_round_trip_both_signs() {
        let (pos, mag) = word_as_signed(&signed_word(true, U256::from(5u64)));
        assert!(pos);
        assert_eq!(mag, U256::from(5u64));
        let (pos, mag) = word_as_signed(&signed_word(false, U256::from(5u64)));
        assert!(!pos);
        assert_eq!(mag, U256::from(5u64));
    }

    #[test]
    fn out_of_bounds_reads_return_none() {
        assert_eq!(word_at(&[0u8; 31], 0), None);
        assert_eq!(arg_word(&[0u8; 3], 0), None);
        assert!(arg_dynamic_bytes(&[0u8; 4], 0).is_none());
    }

    #[test]
    fn erc20_selectors_derive_from_canonical_signatures() {
        assert_eq!(
            selector_of("transfer(address,uint256)"),
            crate::model::SEL_TRANSFER
        );
        assert_eq!(
            selector_of("transferFrom(address,address,uint256)"),
            crate::model::SEL_TRANSFER_FROM
        );
    }
}
