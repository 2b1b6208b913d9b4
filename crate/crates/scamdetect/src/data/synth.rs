//! Synthetic corpus with a planted phishing motif. Benign contracts are
//! chains of stack-neutral arithmetic and memory blocks wired by resolved
//! PUSH/JUMP plus one calldata-driven JUMPI fork. Phishing contracts get
//! the same skeleton, but the fork lands on a block that stores a masked
//! CALLER to a slot and then runs a call-heavy block, so node category
//! features carry the label signal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetRecord, Label, Source};
use crate::obfuscate::program::{emit, ObfBlock, ObfInstr, Program};

const MSTORE: u8 = 0x52;
const MLOAD: u8 = 0x51;
const CALLDATALOAD: u8 = 0x35;
const JUMPDEST: u8 = 0x5b;
const JUMP: u8 = 0x56;
const JUMPI: u8 = 0x57;
const STOP: u8 = 0x00;
const RETURN: u8 = 0xf3;
const POP: u8 = 0x50;
const DUP1: u8 = 0x80;
const CALLER: u8 = 0x33;
const AND: u8 = 0x16;
const SSTORE: u8 = 0x55;

pub fn synth_generate(n_benign: usize, n_phishing: usize, seed: u64) -> Vec<DatasetRecord> {
    assert!(n_benign >= 1 && n_phishing >= 1, "both class counts must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_benign + n_phishing);
    for i in 0..n_benign {
        records.push(record(Label::Benign, i, &mut rng));
    }
    for i in 0..n_phishing {
        records.push(record(Label::Phishing, i, &mut rng));
    }
    records
}

fn record(label: Label, index: usize, rng: &mut ChaCha8Rng) -> DatasetRecord {
    let mut program = generate_program(label, rng);
    let (bytes, _) = emit(&mut program).expect("generated jumps always resolve");
    let class = match label {
        Label::Benign => "benign",
        Label::Phishing => "phishing",
    };
    DatasetRecord {
        address: format!("synth-{class}-{index:04}"),
        bytecode: format!("0x{}", hex::encode(bytes)),
        label,
        source: Source::Synthetic,
        split: None,
    }
}

fn generate_program(label: Label, rng: &mut ChaCha8Rng) -> Program {
    let n_blocks = rng.gen_range(4..=10usize);
    let fork_target = match label {
        // Any chain block past the fallthrough works as the taken branch.
        Label::Benign => rng.gen_range(2..n_blocks),
        Label::Phishing => n_blocks,
    };

    let mut blocks = Vec::new();

    // Entry: patterns, then JUMPI on the first calldata word. Not taken
    // falls through into block 1.
    let mut entry = Vec::new();
    push_patterns(&mut entry, rng);
    entry.push(ObfInstr::push1(0));
    entry.push(ObfInstr::plain(CALLDATALOAD));
    entry.push(ObfInstr::target_push(fork_target));
    entry.push(ObfInstr::plain(JUMPI));
    blocks.push(ObfBlock { label: 0, instrs: entry });

    for k in 1..n_blocks {
        let mut instrs = vec![ObfInstr::plain(JUMPDEST)];
        push_patterns(&mut instrs, rng);
        if k + 1 < n_blocks {
            instrs.push(ObfInstr::target_push(k + 1));
            instrs.push(ObfInstr::plain(JUMP));
        } else if rng.gen_bool(0.5) {
            instrs.push(ObfInstr::plain(STOP));
        } else {
            instrs.push(ObfInstr::push1(0x20));
            instrs.push(ObfInstr::push1(0));
            instrs.push(ObfInstr::plain(RETURN));
        }
        blocks.push(ObfBlock { label: k, instrs });
    }

    if label == Label::Phishing {
        // Motif part 1: mask the caller and persist it, then fall through.
        let m1 = vec![
            ObfInstr::plain(JUMPDEST),
            ObfInstr::plain(CALLER),
            address_mask(rng),
            ObfInstr::plain(AND),
            ObfInstr::push1(rng.gen_range(0..4)),
            ObfInstr::plain(SSTORE),
        ];
        // Motif part 2: a run of system-range calls, then rejoin the
        // skeleton at its terminal block.
        let mut m2 = vec![ObfInstr::plain(JUMPDEST)];
        for (op, arity) in [(0xf1u8, 7usize), (0xf4, 6), (0xfa, 6)] {
            for _ in 0..arity {
                m2.push(ObfInstr::push1(0));
            }
            m2.push(ObfInstr::plain(op));
            m2.push(ObfInstr::plain(POP));
        }
        m2.push(ObfInstr::target_push(n_blocks - 1));
        m2.push(ObfInstr::plain(JUMP));

        blocks.push(ObfBlock { label: n_blocks, instrs: m1 });
        blocks.push(ObfBlock { label: n_blocks + 1, instrs: m2 });
    }

    Program { blocks }
}

/// A 20-byte PUSH for the AND mask, mimicking an address constant.
fn address_mask(rng: &mut ChaCha8Rng) -> ObfInstr {
    let mut imm = vec![0u8; 20];
    rng.fill(imm.as_mut_slice());
    ObfInstr { op: 0x73, imm, target: None }
}

/// Appends one to three stack-neutral snippets drawn from a small pool.
/// Every opcode used here is inside the interpreter subset.
fn push_patterns(instrs: &mut Vec<ObfInstr>, rng: &mut ChaCha8Rng) {
    let slots = [0x00u8, 0x20, 0x40, 0x60];
    for _ in 0..rng.gen_range(1..=3usize) {
        let slot = slots[rng.gen_range(0..slots.len())];
        match rng.gen_range(0..5u8) {
            0 => {
                // a OP b stored to memory
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::plain([0x01, 0x02, 0x03, 0x04][rng.gen_range(0..4)]));
                instrs.push(ObfInstr::push1(slot));
                instrs.push(ObfInstr::plain(MSTORE));
            }
            1 => {
                // load, combine with a constant, store elsewhere
                instrs.push(ObfInstr::push1(slot));
                instrs.push(ObfInstr::plain(MLOAD));
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::plain([0x01, 0x16, 0x17, 0x18][rng.gen_range(0..4)]));
                instrs.push(ObfInstr::push1(slots[rng.gen_range(0..slots.len())]));
                instrs.push(ObfInstr::plain(MSTORE));
            }
            2 => {
                // stash a calldata word
                instrs.push(ObfInstr::push1([0x00, 0x04, 0x20, 0x24][rng.gen_range(0..4)]));
                instrs.push(ObfInstr::plain(CALLDATALOAD));
                instrs.push(ObfInstr::push1(slot));
                instrs.push(ObfInstr::plain(MSTORE));
            }
            3 => {
                // comparison result to memory
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::plain([0x10, 0x11, 0x14][rng.gen_range(0..3)]));
                instrs.push(ObfInstr::push1(slot));
                instrs.push(ObfInstr::plain(MSTORE));
            }
            _ => {
                // dup churn that nets to nothing
                instrs.push(ObfInstr::push1(rng.gen()));
                instrs.push(ObfInstr::plain(DUP1));
                instrs.push(ObfInstr::plain(0x02));
                instrs.push(ObfInstr::plain(POP));
            }
        }
    }
}
