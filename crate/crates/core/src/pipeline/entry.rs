//! Bucket entry encodings: PRF output plus an exact/variant flag.

use sha2::{Digest, Sha256};

use crate::oprf::{variant_tag, PrfOutput, OUTPUT_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum EntryMode {
    /// 16 bytes; variants have the final bit flipped.
    LastBit = 0,
    /// 17 bytes: the output followed by a tag byte XORed with the flag.
    FlagByte = 1,
}

impl EntryMode {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(EntryMode::LastBit),
            1 => Some(EntryMode::FlagByte),
            _ => None,
        }
    }

    pub fn entry_len(self) -> usize {
        match self {
            EntryMode::LastBit => OUTPUT_LEN,
            EntryMode::FlagByte => OUTPUT_LEN + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntryMode::LastBit => "last-bit",
            EntryMode::FlagByte => "flag-byte",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "last-bit" => Some(EntryMode::LastBit),
            "flag-byte" => Some(EntryMode::FlagByte),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum EntryKind {
    Exact = 0,
    Variant = 1,
}

impl EntryKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(EntryKind::Exact),
            1 => Some(EntryKind::Variant),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntryKind::Exact => "exact",
            EntryKind::Variant => "variant",
        }
    }
}

fn flag_tag(out: &PrfOutput) -> u8 {
    Sha256::new()
        .chain_update(b"MIGP-v1-flag")
        .chain_update(out.as_bytes())
        .finalize()[0]
}

pub fn encode_entry(mode: EntryMode, out: &PrfOutput, kind: EntryKind) -> Vec<u8> {
    match mode {
        EntryMode::LastBit => match kind {
            EntryKind::Exact => out.as_bytes().to_vec(),
            EntryKind::Variant => variant_tag(out).as_bytes().to_vec(),
        },
        EntryMode::FlagByte => {
            let mut v = out.as_bytes().to_vec();
            v.push(flag_tag(out) ^ kind as u8);
            v
        }
    }
}
