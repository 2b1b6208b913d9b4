//! End-to-end orchestration: classification metrics and the robustness
//! report that retrains nothing, obfuscates the test split, re-runs the
//! whole front end, and compares a graph model against the histogram
//! baseline on clean and transformed code.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DatasetRecord;
use crate::disasm::Bytecode;
use crate::features::{featurize, GraphSample};
use crate::model::{forward, ModelError, ModelParams};
use crate::num::Scalar;
use crate::obfuscate::{check_equivalence, obfuscate, InterpError, ObfConfig, Verdict};

/// Calldata vectors per equivalence spot-check.
const SPOT_CHECK_VECTORS: usize = 32;
/// Mixed into each config seed so subsample choice is deterministic but
/// not correlated with the obfuscation draws themselves.
const SPOT_CHECK_SALT: u64 = 0x73706f74;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("empty evaluation set")]
    EmptySet,
    #[error("records cannot be processed: {}", .addresses.join(", "))]
    PreconditionViolated { addresses: Vec<String> },
    #[error("obfuscation changed behavior of {address} (config {config_index})")]
    EquivalenceFailure { address: String, config_index: usize },
    #[error("equivalence oracle failed on {address}: {source}")]
    OracleFailure {
        address: String,
        #[source]
        source: InterpError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Raw confusion counts; `fneg` serializes as "fn", which the field name
/// cannot be in Rust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    #[serde(rename = "fn")]
    pub fneg: usize,
    pub fp: usize,
    pub tn: usize,
    pub tp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: Confusion,
    pub f1: f64,
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
}

impl Metrics {
    /// Zero denominators follow the usual conventions: precision and
    /// recall are 0 when undefined, f1 is 0 when precision+recall is 0.
    pub fn from_confusion(confusion: Confusion) -> Metrics {
        let Confusion { fneg, fp, tn, tp } = confusion;
        let n = tp + fp + tn + fneg;
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let accuracy = ratio(tp + tn, n);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics { accuracy, confusion, f1, n, precision, recall }
    }
}

/// Thresholds the forward pass at 0.5; phishing is the positive class.
pub fn evaluate<S: Scalar>(
    params: &ModelParams<S>,
    samples: &[GraphSample<S>],
) -> Result<Metrics, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    let mut confusion = Confusion { fneg: 0, fp: 0, tn: 0, tp: 0 };
    for sample in samples {
        let p = forward(params, sample)?.into_f64();
        match (p > 0.5, sample.label == 1) {
            (true, true) => confusion.tp += 1,
            (true, false) => confusion.fp += 1,
            (false, false) => confusion.tn += 1,
            (false, true) => confusion.fneg += 1,
        }
    }
    Ok(Metrics::from_confusion(confusion))
}

/// Per-config outcome inside a robustness report. Deltas are accuracy
/// drops (clean minus obfuscated), positive when the transformation hurt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub baseline_obfuscated: Metrics,
    pub config: ObfConfig,
    pub delta_accuracy: f64,
    pub delta_accuracy_baseline: f64,
    /// Spot-check records whose code leaves the interpreter subset; the
    /// oracle cannot attest them, so they are reported rather than judged.
    pub excluded: usize,
    pub obfuscated: Metrics,
    pub spot_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub baseline_clean: Metrics,
    pub clean: Metrics,
    pub configs: Vec<ConfigReport>,
}

/// Evaluates `params` and `baseline` on the given records, then once more
/// per obfuscation config on transformed bytecode. A seeded 10% subsample
/// of every config's variants must pass the equivalence oracle before that
/// config's metrics are reported; a NotEquivalent verdict aborts the whole
/// report since it means the transformation itself is broken.
pub fn robustness_report<S: Scalar>(
    params: &ModelParams<S>,
    baseline: &ModelParams<S>,
    test_records: &[DatasetRecord],
    configs: &[ObfConfig],
) -> Result<RobustnessReport, PipelineError> {
    if test_records.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    let codes = parse_all(test_records)?;
    let clean_samples = featurize_all(test_records, &codes)?;
    let clean = evaluate(params, &clean_samples)?;
    let baseline_clean = evaluate(baseline, &clean_samples)?;

    let mut reports = Vec::with_capacity(configs.len());
    for (config_index, config) in configs.iter().enumerate() {
        let mut variants = Vec::with_capacity(codes.len());
        let mut refused = Vec::new();
        for (record, code) in test_records.iter().zip(&codes) {
            match obfuscate(code, config) {
                Ok(variant) => variants.push(variant),
                Err(_) => refused.push(record.address.clone()),
            }
        }
        if !refused.is_empty() {
            return Err(PipelineError::PreconditionViolated { addresses: refused });
        }

        let (spot_checked, excluded) = spot_check(
            test_records,
            &codes,
            &variants,
            config,
            config_index,
        )?;

        let obf_samples = featurize_all(test_records, &variants)?;
        let obfuscated = evaluate(params, &obf_samples)?;
        let baseline_obfuscated = evaluate(baseline, &obf_samples)?;
        reports.push(ConfigReport {
            delta_accuracy: clean.accuracy - obfuscated.accuracy,
            delta_accuracy_baseline: baseline_clean.accuracy - baseline_obfuscated.accuracy,
            baseline_obfuscated,
            config: config.clone(),
            excluded,
            obfuscated,
            spot_checked,
        });
    }

    Ok(RobustnessReport { baseline_clean, clean, configs: reports })
}

fn parse_all(records: &[DatasetRecord]) -> Result<Vec<Bytecode>, PipelineError> {
    let mut codes = Vec::with_capacity(records.len());
    let mut bad = Vec::new();
    for record in records {
        match Bytecode::parse_hex(&record.bytecode) {
            Ok(code) => codes.push(code),
            Err(_) => bad.push(record.address.clone()),
        }
    }
    if bad.is_empty() {
        Ok(codes)
    } else {
        Err(PipelineError::PreconditionViolated { addresses: bad })
    }
}

fn featurize_all<S: Scalar>(
    records: &[DatasetRecord],
    codes: &[Bytecode],
) -> Result<Vec<GraphSample<S>>, PipelineError> {
    let mut samples = Vec::with_capacity(codes.len());
    let mut bad = Vec::new();
    for (record, code) in records.iter().zip(codes) {
        match featurize(code, record.label.as_u8(), record.address.clone()) {
            Ok(sample) => samples.push(sample),
            Err(_) => bad.push(record.address.clone()),
        }
    }
    if bad.is_empty() {
        Ok(samples)
    } else {
        Err(PipelineError::PreconditionViolated { addresses: bad })
    }
}

/// Checks a seeded 10% subsample (at least one record) for behavioral
/// equivalence. Returns (attested, excluded-as-unsupported).
fn spot_check(
    records: &[DatasetRecord],
    originals: &[Bytecode],
    variants: &[Bytecode],
    config: &ObfConfig,
    config_index: usize,
) -> Result<(usize, usize), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SPOT_CHECK_SALT);
    let mut order: Vec<usize> = (0..originals.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(std::cmp::max(1, originals.len() / 10));

    let mut spot_checked = 0;
    let mut excluded = 0;
    for i in order {
        let verdict = check_equivalence(&originals[i], &variants[i], SPOT_CHECK_VECTORS, rng.gen())
            .map_err(|source| PipelineError::OracleFailure {
                address: records[i].address.clone(),
                source,
            })?;
        match verdict {
            Verdict::Equivalent => spot_checked += 1,
            Verdict::Unsupported { .. } => excluded += 1,
            Verdict::NotEquivalent => {
                return Err(PipelineError::EquivalenceFailure {
                    address: records[i].address.clone(),
                    config_index,
                });
            }
        }
    }
    Ok((spot_checked, excluded))
}
