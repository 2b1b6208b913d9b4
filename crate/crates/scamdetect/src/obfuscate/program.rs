//! Block-level program representation the transformation passes edit.
//! Jump-target PUSHes are symbolic (they name a block label); concrete
//! offsets are assigned at emission by iterating layout to a fixpoint,
//! widening PUSH immediates that no longer fit.

use std::collections::BTreeMap;

use crate::cfg::{analyze_block_exit, Cfg, EdgeKind, EdgeTarget, Terminator};
use crate::disasm::{opcode_info, InstructionStream};

use super::ObfError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ObfInstr {
    pub op: u8,
    /// Immediate bytes for non-target pushes; ignored for target pushes,
    /// which are materialized from the label at emission.
    pub imm: Vec<u8>,
    /// Block label this PUSH must resolve to.
    pub target: Option<usize>,
}

impl ObfInstr {
    pub fn plain(op: u8) -> Self {
        ObfInstr { op, imm: Vec::new(), target: None }
    }

    /// A PUSH1 with the given byte.
    pub fn push1(value: u8) -> Self {
        ObfInstr { op: 0x60, imm: vec![value], target: None }
    }

    /// A minimal-width PUSH of an arbitrary value.
    #[cfg(test)]
    pub fn push_value(value: u128) -> Self {
        let width = ((128 - value.leading_zeros() as usize) + 7) / 8;
        if width == 0 {
            return ObfInstr { op: 0x5f, imm: Vec::new(), target: None };
        }
        let bytes = value.to_be_bytes()[16 - width..].to_vec();
        ObfInstr { op: 0x5f + width as u8, imm: bytes, target: None }
    }

    /// A PUSH1 placeholder that the emitter will point at `label`,
    /// widening as needed.
    pub fn target_push(label: usize) -> Self {
        ObfInstr { op: 0x60, imm: Vec::new(), target: Some(label) }
    }

    pub fn is_push(&self) -> bool {
        (0x5f..=0x7f).contains(&self.op)
    }

    /// Encoded length under the instruction's current width.
    fn encoded_len(&self) -> usize {
        if self.is_push() {
            1 + (self.op - 0x5f) as usize
        } else {
            1 + opcode_info(self.op).immediate_len as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ObfBlock {
    /// Stable identity: the block id in the source CFG (or a generator's
    /// own numbering). Jump targets refer to labels, not positions.
    pub label: usize,
    pub instrs: Vec<ObfInstr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Program {
    /// Blocks in layout order; blocks[0] is the entry.
    pub blocks: Vec<ObfBlock>,
}

impl Program {
    /// Index of the first jump-target PUSH in a block, if any. Junk and
    /// substitution never insert at or beyond the position after it, so
    /// nothing lands between a target PUSH and its JUMP/JUMPI.
    pub fn guard_idx(block: &ObfBlock) -> Option<usize> {
        block.instrs.iter().position(|i| i.target.is_some())
    }
}

/// Builds the editable program from a fully resolved CFG. Refuses when any
/// jump lacks a rewritable intra-block target PUSH.
pub(crate) fn lower(stream: &InstructionStream, cfg: &Cfg) -> Result<Program, ObfError> {
    let _ = stream;
    if cfg.has_unknown_node {
        return Err(ObfError::UnresolvableJumps);
    }
    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    for block in &cfg.blocks {
        let mut instrs: Vec<ObfInstr> = block
            .instructions
            .iter()
            .map(|i| ObfInstr {
                op: i.byte_value(),
                imm: i.immediate.clone(),
                target: None,
            })
            .collect();
        if matches!(block.terminator, Terminator::Jump | Terminator::Branch) {
            let safe = analyze_block_exit(block)
                .and_then(|a| a.safe_push)
                .ok_or(ObfError::UnresolvableJumps)?;
            let wanted = if block.terminator == Terminator::Jump {
                EdgeKind::Jump
            } else {
                EdgeKind::BranchTaken
            };
            let target = cfg
                .edges
                .iter()
                .find(|e| e.from == block.id && e.kind == wanted)
                .map(|e| match e.to {
                    EdgeTarget::Block(t) => t,
                    EdgeTarget::Unknown => unreachable!("no unknown node"),
                })
                .ok_or(ObfError::UnresolvableJumps)?;
            instrs[safe].target = Some(target);
        }
        blocks.push(ObfBlock { label: block.id, instrs });
    }
    Ok(Program { blocks })
}

const MAX_EMIT_ROUNDS: usize = 16;

/// Assigns concrete offsets and serializes. Target PUSH widths only ever
/// grow, so the offset map is monotone and the loop reaches a fixpoint in
/// a handful of rounds.
pub(crate) fn emit(program: &mut Program) -> Result<(Vec<u8>, BTreeMap<usize, usize>), ObfError> {
    let mut offsets: BTreeMap<usize, usize> = BTreeMap::new();
    let mut converged = false;
    for _ in 0..MAX_EMIT_ROUNDS {
        offsets.clear();
        let mut off = 0usize;
        for block in &program.blocks {
            offsets.insert(block.label, off);
            for instr in &block.instrs {
                off += instr.encoded_len();
            }
        }
        let mut changed = false;
        for block in &mut program.blocks {
            for instr in &mut block.instrs {
                let Some(label) = instr.target else { continue };
                let dest = *offsets.get(&label).ok_or(ObfError::UnresolvableJumps)?;
                let needed = needed_width(dest);
                let current = (instr.op - 0x5f) as usize;
                if needed > current {
                    instr.op = 0x5f + needed as u8;
                    changed = true;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ObfError::FixpointDivergence);
    }

    let mut bytes = Vec::new();
    for block in &program.blocks {
        for instr in &block.instrs {
            bytes.push(instr.op);
            match instr.target {
                Some(label) => {
                    let dest = offsets[&label];
                    let width = (instr.op - 0x5f) as usize;
                    let be = (dest as u128).to_be_bytes();
                    bytes.extend_from_slice(&be[16 - width..]);
                }
                None => {
                    if instr.is_push() {
                        let width = (instr.op - 0x5f) as usize;
                        debug_assert_eq!(instr.imm.len(), width);
                        bytes.extend_from_slice(&instr.imm[..width]);
                    } else {
                        bytes.extend_from_slice(&instr.imm);
                    }
                }
            }
        }
    }
    Ok((bytes, offsets))
}

fn needed_width(offset: usize) -> usize {
    // Offset 0 is encodable by PUSH0; wider pushes keep their width.
    let bits = usize::BITS as usize - offset.leading_zeros() as usize;
    (bits + 7) / 8
}
