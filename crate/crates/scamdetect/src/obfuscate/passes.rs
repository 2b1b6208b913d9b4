//! The transformation passes. All of them edit the symbolic Program, so
//! jump targets survive any amount of insertion and reshuffling; the
//! emitter reassigns offsets afterwards.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::disasm::opcode_info;

use super::program::{ObfBlock, ObfInstr, Program};

/// Picks round(intensity * n) block indices (at least one), ascending.
fn touched_blocks(rng: &mut ChaCha8Rng, n: usize, intensity: f64) -> Vec<usize> {
    let k = ((intensity * n as f64).round() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Valid insertion positions for stack-neutral material: after a leading
/// JUMPDEST (jumps must keep landing on it), never past the first
/// jump-target PUSH, never after a terminator.
fn insertion_window(block: &ObfBlock) -> (usize, usize) {
    let lo = usize::from(block.instrs.first().map_or(false, |i| i.op == 0x5b));
    let hi = match Program::guard_idx(block) {
        Some(guard) => guard,
        None => {
            let terminated = block
                .instrs
                .last()
                .map_or(false, |i| opcode_info(i.op).is_terminator);
            block.instrs.len() - usize::from(terminated)
        }
    };
    (lo, hi)
}

/// Inserts one `PUSH1 r; POP` pair and one lone JUMPDEST per touched
/// block. Both are stack-neutral; the JUMPDEST is a decoy destination no
/// jump refers to.
pub(crate) fn junk(program: &mut Program, rng: &mut ChaCha8Rng, intensity: f64) {
    for bi in touched_blocks(rng, program.blocks.len(), intensity) {
        let block = &mut program.blocks[bi];
        let (lo, hi) = insertion_window(block);
        if lo > hi {
            continue;
        }
        let pos = rng.gen_range(lo..=hi);
        let value = rng.gen::<u8>();
        block
            .instrs
            .splice(pos..pos, [ObfInstr::push1(value), ObfInstr::plain(0x50)]);

        let (lo, hi) = insertion_window(block);
        let pos = rng.gen_range(lo..=hi);
        block.instrs.insert(pos, ObfInstr::plain(0x5b));
    }
}

/// Permutes block layout (entry pinned first) and repairs every broken
/// fallthrough with an explicit `PUSHn <label>; JUMP`, prepending a
/// JUMPDEST to targets that lack one. A block that used to fall off the
/// end of the code gets an explicit STOP when it is moved inward.
pub(crate) fn reorder(program: &mut Program, rng: &mut ChaCha8Rng) {
    let n = program.blocks.len();
    if n > 2 {
        program.blocks[1..].shuffle(rng);
    }
    let max_label = program.blocks.iter().map(|b| b.label).max().unwrap_or(0);

    enum Fix {
        JumpTo(usize),
        Stop,
    }
    let mut fixes: Vec<(usize, Fix)> = Vec::new(); // (position, fix)
    let mut need_jumpdest: Vec<usize> = Vec::new(); // labels

    for (pos, block) in program.blocks.iter().enumerate() {
        let last_op = match block.instrs.last() {
            Some(i) => i.op,
            None => continue,
        };
        let falls_through = !opcode_info(last_op).is_terminator || last_op == 0x57;
        if !falls_through {
            continue;
        }
        let orig_next = (block.label < max_label).then_some(block.label + 1);
        let new_next = program.blocks.get(pos + 1).map(|b| b.label);
        match orig_next {
            // Fallthrough target exists: layout must keep it adjacent or
            // jump there explicitly.
            Some(next) if new_next != Some(next) => {
                fixes.push((pos, Fix::JumpTo(next)));
                need_jumpdest.push(next);
            }
            // Used to run off the end of the code (implicit stop); moving
            // the block inward would run into a foreign successor.
            None if new_next.is_some() => fixes.push((pos, Fix::Stop)),
            _ => {}
        }
    }

    for (pos, fix) in fixes {
        let instrs = &mut program.blocks[pos].instrs;
        match fix {
            Fix::JumpTo(label) => {
                instrs.push(ObfInstr::target_push(label));
                instrs.push(ObfInstr::plain(0x56));
            }
            Fix::Stop => instrs.push(ObfInstr::plain(0x00)),
        }
    }
    for label in need_jumpdest {
        let block = program
            .blocks
            .iter_mut()
            .find(|b| b.label == label)
            .expect("fallthrough target exists");
        if block.instrs.first().map_or(true, |i| i.op != 0x5b) {
            block.instrs.insert(0, ObfInstr::plain(0x5b));
        }
    }
}

/// Rewrites from a fixed catalog of value-preserving equivalences:
///   PUSH1 0x00         -> PUSH1 0x01; PUSH1 0x01; SUB
///   PUSH1 n (n >= 1)   -> PUSH1 n-1;  PUSH1 0x01; ADD
///   <any point with a known value on the stack> -> insert DUP1; POP
/// Jump-target PUSHes are never rewritten.
pub(crate) fn substitute(program: &mut Program, rng: &mut ChaCha8Rng, intensity: f64) {
    enum Site {
        RewritePush(usize),
        DupPop(usize),
    }

    for bi in touched_blocks(rng, program.blocks.len(), intensity) {
        let block = &mut program.blocks[bi];
        let guard = Program::guard_idx(block).unwrap_or(block.instrs.len());
        let (_, hi) = insertion_window(block);

        let mut sites: Vec<Site> = Vec::new();
        for (i, instr) in block.instrs.iter().take(guard).enumerate() {
            if instr.op == 0x60 && instr.target.is_none() {
                sites.push(Site::RewritePush(i));
            }
        }
        // DUP1 needs a value that provably exists: track the net stack
        // delta from block entry; delta >= 1 guarantees one.
        let mut delta: i64 = 0;
        for p in 0..=hi {
            if delta >= 1 {
                sites.push(Site::DupPop(p));
            }
            if p < block.instrs.len() {
                let spec = opcode_info(block.instrs[p].op);
                delta += spec.stack_pushes as i64 - spec.stack_pops as i64;
            }
        }

        if sites.is_empty() {
            continue;
        }
        match sites[rng.gen_range(0..sites.len())] {
            Site::RewritePush(i) => {
                let value = block.instrs[i].imm[0];
                let replacement = if value == 0 {
                    [ObfInstr::push1(1), ObfInstr::push1(1), ObfInstr::plain(0x03)]
                } else {
                    [ObfInstr::push1(value - 1), ObfInstr::push1(1), ObfInstr::plain(0x01)]
                };
                block.instrs.splice(i..i + 1, replacement);
            }
            Site::DupPop(p) => {
                block
                    .instrs
                    .splice(p..p, [ObfInstr::plain(0x80), ObfInstr::plain(0x50)]);
            }
        }
    }
}
