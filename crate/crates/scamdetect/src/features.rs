//! Numeric views of a contract: per-block feature vectors for the graph
//! models and a 256-bin opcode histogram for the baseline.
//!
//! Node features are deliberately coarse (14 opcode categories plus four
//! structural slots) so desk-scale models stay small; the raw histogram is
//! kept at graph level for the baseline classifier.

use serde_json::json;
use thiserror::Error;

use crate::cfg::{BasicBlock, Cfg, CfgError, EdgeTarget};
use crate::disasm::opcode::{op, Category};
use crate::disasm::{disassemble, Bytecode, InstructionStream};
use crate::model::DenseMatrix;
use crate::num::Scalar;

/// Node feature dimensionality: 14 category frequencies, ln(1+len),
/// is_entry, ends_unresolved, has_external_call.
pub const NODE_FEATURE_DIM: usize = Category::COUNT + 4;

pub const HISTOGRAM_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures<S: Scalar> {
    pub matrix: DenseMatrix<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpcodeHistogram<S: Scalar> {
    pub vector: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample<S: Scalar> {
    /// Directed (from, to) pairs over 0..n-1, deduplicated.
    pub adjacency: Vec<(usize, usize)>,
    pub features: NodeFeatures<S>,
    /// 0 = benign, 1 = phishing.
    pub label: u8,
    pub id: String,
    /// Whole-contract opcode histogram; present when the sample was built
    /// from bytecode, absent for hand-assembled graphs.
    pub histogram: Option<OpcodeHistogram<S>>,
}

#[derive(Debug, Error)]
pub enum SampleParseError {
    #[error("sample is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sample JSON malformed: {0}")]
    Schema(String),
}

impl<S: Scalar> GraphSample<S> {
    pub fn node_count(&self) -> usize {
        self.features.matrix.rows
    }
}

/// 18-dim feature row for one block of `cfg`.
pub fn block_features<S: Scalar>(block: &BasicBlock, cfg: &Cfg) -> Vec<S> {
    let mut row = vec![S::zero(); NODE_FEATURE_DIM];
    let len = block.instructions.len();
    for instr in &block.instructions {
        row[instr.spec.category.index()] += S::one();
    }
    let len_s = S::from_usize(len);
    for slot in row.iter_mut().take(Category::COUNT) {
        *slot /= len_s;
    }
    row[Category::COUNT] = (S::one() + len_s).ln();
    row[Category::COUNT + 1] = if block.id == cfg.entry { S::one() } else { S::zero() };
    row[Category::COUNT + 2] = if cfg.block_ends_unresolved(block.id) {
        S::one()
    } else {
        S::zero()
    };
    let external_call = block.instructions.iter().any(|i| {
        matches!(
            i.byte_value(),
            op::CALL | op::CALLCODE | op::DELEGATECALL | op::STATICCALL
        )
    });
    row[Category::COUNT + 3] = if external_call { S::one() } else { S::zero() };
    row
}

/// Frequency of each opcode byte over the instruction count. Immediate
/// bytes are data and never counted. All zeros for empty code.
pub fn opcode_histogram<S: Scalar>(stream: &InstructionStream) -> OpcodeHistogram<S> {
    let mut vector = vec![S::zero(); HISTOGRAM_DIM];
    let n = stream.instructions.len();
    if n == 0 {
        return OpcodeHistogram { vector };
    }
    for instr in &stream.instructions {
        vector[instr.byte_value() as usize] += S::one();
    }
    let n_s = S::from_usize(n);
    for v in vector.iter_mut() {
        *v /= n_s;
    }
    OpcodeHistogram { vector }
}

/// Assembles the graph-learning view of a CFG: blocks in id order, the
/// UNKNOWN sink appended as an all-zero row when present, edges mapped to
/// node indices and deduplicated.
pub fn graph_sample<S: Scalar>(cfg: &Cfg, label: u8, id: impl Into<String>) -> GraphSample<S> {
    debug_assert!(label <= 1);
    let n = cfg.node_count();
    let mut matrix = DenseMatrix::zeros(n, NODE_FEATURE_DIM);
    for block in &cfg.blocks {
        let row = block_features::<S>(block, cfg);
        for (j, v) in row.into_iter().enumerate() {
            matrix[(block.id, j)] = v;
        }
    }
    // The UNKNOWN row (if any) stays all zeros.

    let unknown = cfg.unknown_id();
    let mut adjacency = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for edge in &cfg.edges {
        let to = match edge.to {
            EdgeTarget::Block(id) => id,
            EdgeTarget::Unknown => unknown,
        };
        if seen.insert((edge.from, to)) {
            adjacency.push((edge.from, to));
        }
    }

    GraphSample {
        adjacency,
        features: NodeFeatures { matrix },
        label,
        id: id.into(),
        histogram: None,
    }
}

/// Full front end: disassemble, build the CFG, featurize, and attach the
/// opcode histogram.
pub fn featurize<S: Scalar>(
    code: &Bytecode,
    label: u8,
    id: impl Into<String>,
) -> Result<GraphSample<S>, CfgError> {
    let stream = disassemble(code);
    let cfg = crate::cfg::build_cfg(&stream)?;
    let mut sample = graph_sample(&cfg, label, id);
    sample.histogram = Some(opcode_histogram(&stream));
    Ok(sample)
}

/// One JSON object per sample; keys are emitted in sorted order.
pub fn sample_to_json<S: Scalar>(sample: &GraphSample<S>) -> serde_json::Value {
    let x: Vec<Vec<f64>> = (0..sample.features.matrix.rows)
        .map(|i| {
            (0..sample.features.matrix.cols)
                .map(|j| sample.features.matrix[(i, j)].into_f64())
                .collect()
        })
        .collect();
    let edges: Vec<Vec<usize>> = sample.adjacency.iter().map(|&(f, t)| vec![f, t]).collect();
    let mut doc = json!({
        "id": sample.id,
        "label": sample.label,
        "n": sample.node_count(),
        "edges": edges,
        "x": x,
    });
    if let Some(hist) = &sample.histogram {
        let h: Vec<f64> = hist.vector.iter().map(|v| v.into_f64()).collect();
        doc["hist"] = json!(h);
    }
    doc
}

pub fn sample_from_json<S: Scalar>(text: &str) -> Result<GraphSample<S>, SampleParseError> {
    let doc: serde_json::Value = serde_json::from_str(text)?;
    let schema = |msg: &str| SampleParseError::Schema(msg.to_string());

    let id = doc["id"].as_str().ok_or_else(|| schema("missing id"))?.to_string();
    let label = doc["label"].as_u64().ok_or_else(|| schema("missing label"))?;
    if label > 1 {
        return Err(schema("label must be 0 or 1"));
    }
    let n = doc["n"].as_u64().ok_or_else(|| schema("missing n"))? as usize;

    let x = doc["x"].as_array().ok_or_else(|| schema("missing x"))?;
    if x.len() != n {
        return Err(schema("x row count differs from n"));
    }
    let mut matrix = DenseMatrix::zeros(n, NODE_FEATURE_DIM);
    for (i, row) in x.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| schema("x row is not an array"))?;
        if row.len() != NODE_FEATURE_DIM {
            return Err(schema("x row has wrong width"));
        }
        for (j, v) in row.iter().enumerate() {
            let v = v.as_f64().ok_or_else(|| schema("x entry is not a number"))?;
            if !v.is_finite() {
                return Err(schema("x entry is not finite"));
            }
            matrix[(i, j)] = S::from_f64(v);
        }
    }

    let edges = doc["edges"].as_array().ok_or_else(|| schema("missing edges"))?;
    let mut adjacency = Vec::with_capacity(edges.len());
    for e in edges {
        let pair = e.as_array().ok_or_else(|| schema("edge is not a pair"))?;
        if pair.len() != 2 {
            return Err(schema("edge is not a pair"));
        }
        let from = pair[0].as_u64().ok_or_else(|| schema("edge endpoint"))? as usize;
        let to = pair[1].as_u64().ok_or_else(|| schema("edge endpoint"))? as usize;
        if from >= n || to >= n {
            return Err(schema("edge endpoint out of range"));
        }
        adjacency.push((from, to));
    }

    let histogram = match &doc["hist"] {
        serde_json::Value::Null => None,
        serde_json::Value::Array(h) => {
            if h.len() != HISTOGRAM_DIM {
                return Err(schema("hist has wrong length"));
            }
            let mut vector = Vec::with_capacity(HISTOGRAM_DIM);
            for v in h {
                let v = v.as_f64().ok_or_else(|| schema("hist entry is not a number"))?;
                vector.push(S::from_f64(v));
            }
            Some(OpcodeHistogram { vector })
        }
        _ => return Err(schema("hist is not an array")),
    };

    Ok(GraphSample {
        adjacency,
        features: NodeFeatures { matrix },
        label: label as u8,
        id,
        histogram,
    })
}

/// Relabels nodes by `perm` (new index of node i is `perm[i]`), permuting
/// feature rows, adjacency, and histogram-independent state consistently.
pub fn permute_sample<S: Scalar>(sample: &GraphSample<S>, perm: &[usize]) -> GraphSample<S> {
    let n = sample.node_count();
    assert_eq!(perm.len(), n, "permutation covers every node");
    let mut matrix = DenseMatrix::zeros(n, sample.features.matrix.cols);
    for i in 0..n {
        for j in 0..sample.features.matrix.cols {
            matrix[(perm[i], j)] = sample.features.matrix[(i, j)];
        }
    }
    let adjacency = sample
        .adjacency
        .iter()
        .map(|&(f, t)| (perm[f], perm[t]))
        .collect();
    GraphSample {
        adjacency,
        features: NodeFeatures { matrix },
        label: sample.label,
        id: sample.id.clone(),
        histogram: sample.histogram.clone(),
    }
}
