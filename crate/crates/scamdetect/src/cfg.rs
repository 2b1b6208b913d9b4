//! Basic-block partitioning and control-flow recovery.
//!
//! Jump resolution is intra-block only: each block is emulated with an
//! abstract stack where PUSH yields its concrete immediate and every other
//! producer yields Unknown. That resolves the dominant compiler idiom
//! (`PUSHn <dest>; JUMP`) cheaply and deterministically; what remains is
//! routed to a single shared UNKNOWN sink so downstream consumers see the
//! uncertainty instead of a silently pruned edge.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::disasm::opcode::{op, Category};
use crate::disasm::{Instruction, InstructionStream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    #[error("instruction stream is empty")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminator {
    Jump,
    Branch,
    Stop,
    Return,
    Revert,
    SelfDestruct,
    Invalid,
    /// Block ends without a terminator opcode: either the next block starts
    /// with a JUMPDEST or the code itself ends.
    FallOff,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub start_offset: usize,
    pub instructions: Vec<Instruction>,
    pub terminator: Terminator,
}

impl BasicBlock {
    pub fn starts_with_jumpdest(&self) -> bool {
        self.instructions[0].byte_value() == op::JUMPDEST
    }

    pub fn has_category(&self, category: Category) -> bool {
        self.instructions.iter().any(|i| i.spec.category == category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTarget {
    Block(usize),
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Fallthrough,
    Jump,
    BranchTaken,
    BranchNotTaken,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CfgEdge {
    pub from: usize,
    pub to: EdgeTarget,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<CfgEdge>,
    pub entry: usize,
    pub has_unknown_node: bool,
}

impl Cfg {
    /// Node index of the shared UNKNOWN sink (only meaningful when
    /// `has_unknown_node` is set).
    pub fn unknown_id(&self) -> usize {
        self.blocks.len()
    }

    /// Node count as seen by graph consumers: blocks plus the UNKNOWN sink
    /// when present.
    pub fn node_count(&self) -> usize {
        self.blocks.len() + usize::from(self.has_unknown_node)
    }

    pub fn block_ends_unresolved(&self, id: usize) -> bool {
        self.edges
            .iter()
            .any(|e| e.from == id && e.kind == EdgeKind::Unresolved)
    }
}

/// Splits the stream at offset 0, before every JUMPDEST, and after every
/// terminator opcode. Unreachable blocks are kept.
pub fn partition_blocks(stream: &InstructionStream) -> Result<Vec<BasicBlock>, CfgError> {
    if stream.instructions.is_empty() {
        return Err(CfgError::EmptyStream);
    }
    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();

    let flush = |current: &mut Vec<Instruction>, blocks: &mut Vec<BasicBlock>| {
        if current.is_empty() {
            return;
        }
        let instructions = std::mem::take(current);
        let terminator = match instructions.last().unwrap() {
            i if !i.spec.is_terminator => Terminator::FallOff,
            i => match i.byte_value() {
                op::JUMP => Terminator::Jump,
                op::JUMPI => Terminator::Branch,
                op::STOP => Terminator::Stop,
                op::RETURN => Terminator::Return,
                op::REVERT => Terminator::Revert,
                op::SELFDESTRUCT => Terminator::SelfDestruct,
                _ => Terminator::Invalid,
            },
        };
        blocks.push(BasicBlock {
            id: blocks.len(),
            start_offset: instructions[0].offset,
            instructions,
            terminator,
        });
    };

    for instr in &stream.instructions {
        if instr.byte_value() == op::JUMPDEST {
            flush(&mut current, &mut blocks);
        }
        let ends_block = instr.spec.is_terminator;
        current.push(instr.clone());
        if ends_block {
            flush(&mut current, &mut blocks);
        }
    }
    flush(&mut current, &mut blocks);
    Ok(blocks)
}

/// What the abstract stack knows about a block's jump target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct JumpAnalysis {
    /// Target offset when the popped slot is a concrete in-block PUSH value.
    pub value: Option<u128>,
    /// Index (within the block) of the PUSH that produced the target, set
    /// only when the jump is that value's sole observable use, so rewriting
    /// the immediate cannot change anything but the jump itself.
    pub safe_push: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AbsVal {
    /// Concrete value pushed by the instruction at block-local index `src`.
    Concrete { value: u128, src: usize },
    Unknown,
}

/// Emulates the block's stack effects. Slots below the block's own frame
/// read as Unknown. Returns the jump-target analysis for Jump/Branch blocks,
/// None otherwise.
pub(crate) fn analyze_block_exit(block: &BasicBlock) -> Option<JumpAnalysis> {
    let mut stack: Vec<AbsVal> = Vec::new();
    let mut tainted: HashSet<usize> = HashSet::new();
    let mut result = None;

    let is_jump_block = matches!(block.terminator, Terminator::Jump | Terminator::Branch);

    for (idx, instr) in block.instructions.iter().enumerate() {
        let byte = instr.byte_value();
        match byte {
            op::PUSH0..=op::PUSH32 => stack.push(AbsVal::Concrete {
                value: instr.immediate_value(),
                src: idx,
            }),
            op::DUP1..=op::DUP16 => {
                let n = (byte - op::DUP1 + 1) as usize;
                let dup = if n <= stack.len() {
                    stack[stack.len() - n]
                } else {
                    AbsVal::Unknown
                };
                if let AbsVal::Concrete { src, .. } = dup {
                    tainted.insert(src);
                }
                stack.push(dup);
            }
            op::SWAP1..=op::SWAP16 => {
                let n = (byte - op::SWAP1 + 1) as usize;
                while stack.len() < n + 1 {
                    stack.insert(0, AbsVal::Unknown);
                }
                let top = stack.len() - 1;
                stack.swap(top, top - n);
            }
            op::JUMP | op::JUMPI if idx == block.instructions.len() - 1 && is_jump_block => {
                let target = stack.pop().unwrap_or(AbsVal::Unknown);
                if byte == op::JUMPI {
                    if let Some(AbsVal::Concrete { src, .. }) = stack.pop() {
                        tainted.insert(src);
                    }
                }
                result = Some(match target {
                    AbsVal::Concrete { value, src } if !tainted.contains(&src) => JumpAnalysis {
                        value: Some(value),
                        safe_push: Some(src),
                    },
                    AbsVal::Concrete { value, .. } => JumpAnalysis {
                        value: Some(value),
                        safe_push: None,
                    },
                    AbsVal::Unknown => JumpAnalysis {
                        value: None,
                        safe_push: None,
                    },
                });
            }
            _ => {
                for _ in 0..instr.spec.stack_pops {
                    if let Some(AbsVal::Concrete { src, .. }) = stack.pop() {
                        tainted.insert(src);
                    }
                }
                for _ in 0..instr.spec.stack_pushes {
                    stack.push(AbsVal::Unknown);
                }
            }
        }
    }

    // A concrete value still live at block exit escapes as data; treat its
    // producing PUSH as unsafe to rewrite.
    if let Some(analysis) = &mut result {
        if let Some(src) = analysis.safe_push {
            let copy_alive = stack
                .iter()
                .any(|v| matches!(v, AbsVal::Concrete { src: s, .. } if *s == src));
            if copy_alive || tainted.contains(&src) {
                analysis.safe_push = None;
            }
        }
    }

    result
}

/// Builds the edge set over the partitioned blocks. Every unresolved or
/// invalid jump target becomes an edge to the shared UNKNOWN sink.
pub fn resolve_jumps(blocks: Vec<BasicBlock>) -> Cfg {
    let starts: HashMap<usize, usize> = blocks
        .iter()
        .map(|b| (b.start_offset, b.id))
        .collect();

    let jumpdest_target = |value: u128| -> Option<usize> {
        let offset = usize::try_from(value).ok()?;
        let id = *starts.get(&offset)?;
        blocks[id].starts_with_jumpdest().then_some(id)
    };

    let mut edges: Vec<CfgEdge> = Vec::new();
    let mut seen: HashSet<CfgEdge> = HashSet::new();
    let mut push_edge = |edges: &mut Vec<CfgEdge>, edge: CfgEdge| {
        if seen.insert(edge) {
            edges.push(edge);
        }
    };

    for block in &blocks {
        match block.terminator {
            Terminator::Jump | Terminator::Branch => {
                let analysis = analyze_block_exit(block).expect("jump block has an exit analysis");
                let taken_kind = if block.terminator == Terminator::Jump {
                    EdgeKind::Jump
                } else {
                    EdgeKind::BranchTaken
                };
                let edge = match analysis.value.and_then(jumpdest_target) {
                    Some(target) => CfgEdge {
                        from: block.id,
                        to: EdgeTarget::Block(target),
                        kind: taken_kind,
                    },
                    None => CfgEdge {
                        from: block.id,
                        to: EdgeTarget::Unknown,
                        kind: EdgeKind::Unresolved,
                    },
                };
                push_edge(&mut edges, edge);
                if block.terminator == Terminator::Branch && block.id + 1 < blocks.len() {
                    push_edge(
                        &mut edges,
                        CfgEdge {
                            from: block.id,
                            to: EdgeTarget::Block(block.id + 1),
                            kind: EdgeKind::BranchNotTaken,
                        },
                    );
                }
            }
            Terminator::FallOff => {
                if block.id + 1 < blocks.len() {
                    push_edge(
                        &mut edges,
                        CfgEdge {
                            from: block.id,
                            to: EdgeTarget::Block(block.id + 1),
                            kind: EdgeKind::Fallthrough,
                        },
                    );
                }
            }
            _ => {}
        }
    }

    let has_unknown_node = edges.iter().any(|e| e.to == EdgeTarget::Unknown);
    Cfg {
        blocks,
        edges,
        entry: 0,
        has_unknown_node,
    }
}

/// Partition plus resolution in one step.
pub fn build_cfg(stream: &InstructionStream) -> Result<Cfg, CfgError> {
    Ok(resolve_jumps(partition_blocks(stream)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

// Field order is the serialized key order; keep it alphabetical so every
// JSON export is sorted-key stable.
#[derive(Serialize)]
struct BlockJson {
    id: usize,
    mnemonics: Vec<&'static str>,
    start: usize,
}

#[derive(Serialize)]
struct EdgeJson {
    from: usize,
    kind: EdgeKind,
    to: serde_json::Value,
}

#[derive(Serialize)]
struct CfgJson {
    blocks: Vec<BlockJson>,
    edges: Vec<EdgeJson>,
}

/// Deterministic text export: nodes in id order, edges in construction
/// order. The UNKNOWN sink appears only when some edge targets it.
pub fn export_cfg(cfg: &Cfg, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => {
            let mut out = String::from("digraph cfg {\n");
            for block in &cfg.blocks {
                out.push_str(&format!(
                    "  b{} [label=\"B{}@{}\"];\n",
                    block.id, block.id, block.start_offset
                ));
            }
            if cfg.has_unknown_node {
                out.push_str("  unknown [label=\"UNKNOWN\", style=dashed];\n");
            }
            for edge in &cfg.edges {
                let to = match edge.to {
                    EdgeTarget::Block(id) => format!("b{id}"),
                    EdgeTarget::Unknown => "unknown".to_string(),
                };
                let kind = serde_json::to_value(edge.kind).unwrap();
                out.push_str(&format!(
                    "  b{} -> {} [label={}];\n",
                    edge.from, to, kind
                ));
            }
            out.push_str("}\n");
            out
        }
        ExportFormat::Json => {
            let doc = CfgJson {
                blocks: cfg
                    .blocks
                    .iter()
                    .map(|b| BlockJson {
                        id: b.id,
                        mnemonics: b.instructions.iter().map(|i| i.spec.mnemonic).collect(),
                        start: b.start_offset,
                    })
                    .collect(),
                edges: cfg
                    .edges
                    .iter()
                    .map(|e| EdgeJson {
                        from: e.from,
                        kind: e.kind,
                        to: match e.to {
                            EdgeTarget::Block(id) => serde_json::json!(id),
                            EdgeTarget::Unknown => serde_json::json!("unknown"),
                        },
                    })
                    .collect(),
            };
            serde_json::to_string_pretty(&doc).expect("cfg export serializes")
        }
    }
}
