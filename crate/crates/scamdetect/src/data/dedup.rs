//! Duplicate removal in two stages: ERC-1167 minimal proxies are collapsed
//! to one per implementation, then remaining records are grouped by the
//! SHA-256 of their metadata-stripped bytes.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::DatasetRecord;
use crate::disasm::{strip_metadata, Bytecode};

const PROXY_PREFIX: [u8; 10] = [0x36, 0x3d, 0x3d, 0x37, 0x3d, 0x3d, 0x3d, 0x36, 0x3d, 0x73];
const PROXY_SUFFIX: [u8; 15] = [
    0x5a, 0xf4, 0x3d, 0x82, 0x80, 0x3e, 0x90, 0x3d, 0x91, 0x60, 0x2b, 0x57, 0xfd, 0x5b, 0xf3,
];

/// Returns the implementation address when the code is byte-exactly the
/// ERC-1167 runtime: prefix, 20-byte address, suffix, nothing else.
pub fn is_minimal_proxy(code: &Bytecode) -> Option<[u8; 20]> {
    let bytes = code.bytes();
    if bytes.len() != 45 || bytes[..10] != PROXY_PREFIX || bytes[30..] != PROXY_SUFFIX {
        return None;
    }
    Some(bytes[10..30].try_into().expect("20-byte slice"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    /// Another proxy to the same implementation came earlier in the input.
    DuplicateProxy { implementation: String },
    /// Same metadata-stripped code as a record with a smaller address.
    DuplicateCode { kept_address: String },
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DropReason::DuplicateProxy { implementation } => {
                write!(f, "duplicate proxy to {implementation}")
            }
            DropReason::DuplicateCode { kept_address } => {
                write!(f, "duplicate code of {kept_address}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dropped {
    pub address: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupReport {
    pub kept: usize,
    pub dropped: Vec<Dropped>,
}

pub fn dedup(records: &[DatasetRecord]) -> (Vec<DatasetRecord>, DedupReport) {
    let mut dropped = Vec::new();

    // Stage 1: first proxy per implementation wins, in input order.
    let mut seen_impls: HashMap<[u8; 20], ()> = HashMap::new();
    let mut survivors: Vec<&DatasetRecord> = Vec::new();
    for record in records {
        let code = parse_or_raw(&record.bytecode);
        if let Some(implementation) = code.as_ref().and_then(is_minimal_proxy) {
            if seen_impls.insert(implementation, ()).is_some() {
                dropped.push(Dropped {
                    address: record.address.clone(),
                    reason: DropReason::DuplicateProxy {
                        implementation: format!("0x{}", hex::encode(implementation)),
                    },
                });
                continue;
            }
        }
        survivors.push(record);
    }

    // Stage 2: group by stripped-code hash, keep the smallest address.
    let mut groups: HashMap<[u8; 32], Vec<&DatasetRecord>> = HashMap::new();
    for record in &survivors {
        let key = match parse_or_raw(&record.bytecode) {
            Some(code) => Sha256::digest(strip_metadata(&code).bytes()).into(),
            None => Sha256::digest(record.bytecode.as_bytes()).into(),
        };
        groups.entry(key).or_default().push(record);
    }
    let mut keep_addr: HashMap<[u8; 32], &str> = HashMap::new();
    for (key, members) in &groups {
        let smallest = members
            .iter()
            .map(|r| r.address.as_str())
            .min()
            .expect("groups are non-empty");
        keep_addr.insert(*key, smallest);
    }

    let mut kept = Vec::new();
    for record in survivors {
        let key: [u8; 32] = match parse_or_raw(&record.bytecode) {
            Some(code) => Sha256::digest(strip_metadata(&code).bytes()).into(),
            None => Sha256::digest(record.bytecode.as_bytes()).into(),
        };
        let winner = keep_addr[&key];
        if record.address == winner {
            kept.push(record.clone());
        } else {
            dropped.push(Dropped {
                address: record.address.clone(),
                reason: DropReason::DuplicateCode { kept_address: winner.to_string() },
            });
        }
    }

    let report = DedupReport { kept: kept.len(), dropped };
    (kept, report)
}

/// Records are validated at load time, but dedup also accepts corpora
/// built in memory; unparseable bytecode falls back to hashing the text.
fn parse_or_raw(bytecode: &str) -> Option<Bytecode> {
    Bytecode::parse_hex(bytecode).ok()
}
