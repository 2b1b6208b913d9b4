//! Corpus management: JSONL persistence, an Etherscan-style fetch client,
//! proxy- and hash-based deduplication, deterministic stratified splitting,
//! and a synthetic corpus generator with a planted phishing motif.

mod dedup;
mod fetch;
mod records;
mod split;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dedup::{dedup, is_minimal_proxy, DedupReport, DropReason, Dropped};
pub use fetch::{fetch_code, FetchConfig, FetchError};
pub use records::{load_jsonl, save_jsonl};
pub use split::split;
pub use synth::synth_generate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Phishing,
}

impl Label {
    /// The numeric form used by graph samples: benign 0, phishing 1.
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Benign => 0,
            Label::Phishing => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Etherscan,
    File,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One labeled contract. Fields serialize in declaration order, which is
/// also alphabetical, so JSONL output has stable sorted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub address: String,
    /// Hex text, with or without a 0x prefix; must parse as bytecode.
    pub bytecode: String,
    pub label: Label,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate address {0}")]
    DuplicateAddress(String),
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split ratios must be non-negative and sum to 1")]
    InvalidRatios,
}
