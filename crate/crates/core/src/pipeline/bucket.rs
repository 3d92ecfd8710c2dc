//! Username bucketing by hash prefix.

use std::fmt;

use sha2::{Digest, Sha256};

use super::corpus::canonicalize_username;

pub const MIN_PREFIX_BITS: u8 = 8;
pub const MAX_PREFIX_BITS: u8 = 32;

const LABEL: &[u8] = b"MIGP-v1-bucket";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketId {
    prefix: u32,
    bits: u8,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum BucketError {
    #[error("prefix length {0} outside {MIN_PREFIX_BITS}..={MAX_PREFIX_BITS}")]
    BadLength(u8),
    #[error("bucket prefix {prefix} does not fit in {bits} bits")]
    OutOfRange { prefix: u64, bits: u8 },
    #[error("malformed bucket id {0:?}")]
    BadHex(String),
}

pub fn check_prefix_bits(bits: u8) -> Result<(), BucketError> {
    if (MIN_PREFIX_BITS..=MAX_PREFIX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(BucketError::BadLength(bits))
    }
}

impl BucketId {
    pub fn new(prefix: u64, bits: u8) -> Result<Self, BucketError> {
        check_prefix_bits(bits)?;
        if prefix >> bits != 0 {
            return Err(BucketError::OutOfRange { prefix, bits });
        }
        Ok(BucketId {
            prefix: prefix as u32,
            bits,
        })
    }

    pub fn prefix(&self) -> u32 {
        self.prefix
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn index(&self) -> usize {
        self.prefix as usize
    }

    fn byte_len(bits: u8) -> usize {
        (bits as usize).div_ceil(8)
    }

    /// Lowercase hex of the prefix left-aligned in `ceil(l/8)` bytes.
    pub fn to_hex(&self) -> String {
        let len = Self::byte_len(self.bits);
        let aligned = (self.prefix as u64) << (8 * len - self.bits as usize);
        let bytes = aligned.to_be_bytes();
        hex::encode(&bytes[8 - len..])
    }

    /// Parses [`BucketId::to_hex`] output; padding bits must be zero.
    pub fn from_hex(s: &str, bits: u8) -> Result<Self, BucketError> {
        check_prefix_bits(bits)?;
        let bad = || BucketError::BadHex(s.to_owned());
        let len = Self::byte_len(bits);
        if s.len() != 2 * len || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(bad());
        }
        let raw = hex::decode(s).map_err(|_| bad())?;
        let mut buf = [0u8; 8];
        buf[8 - len..].copy_from_slice(&raw);
        let aligned = u64::from_be_bytes(buf);
        let pad = 8 * len - bits as usize;
        if aligned & ((1u64 << pad) - 1) != 0 {
            return Err(bad());
        }
        BucketId::new(aligned >> pad, bits)
    }
}

impl fmt::Display for BucketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// The first `bits` bits of a domain-separated SHA-256 of the canonical
/// username.
pub fn bucket_id(username: &str, bits: u8) -> Result<BucketId, BucketError> {
    check_prefix_bits(bits)?;
    Ok(bucket_id_canonical(&canonicalize_username(username), bits))
}

pub(crate) fn bucket_id_canonical(canonical: &str, bits: u8) -> BucketId {
    let d = Sha256::new().chain_update(LABEL).chain_update(canonical.as_bytes()).finalize();
    let top = u32::from_be_bytes([d[0], d[1], d[2], d[3]]);
    BucketId {
        prefix: ((top as u64) >> (32 - bits as u32)) as u32,
        bits,
    }
}
