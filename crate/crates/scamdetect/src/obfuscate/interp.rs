//! A deterministic interpreter for the bytecode subset the synthetic corpus
//! and the obfuscation passes stay inside. It is the equivalence oracle:
//! two programs are compared by status, return data, and final stack.

use std::collections::HashMap;

use ethnum::U256;
use thiserror::Error;

use crate::disasm::{opcode_info, Bytecode};

pub const DEFAULT_STEP_LIMIT: usize = 100_000;

/// Memory is byte-addressed and zero-initialized; a run that touches more
/// than this many bytes is treated as Reverted rather than allocating
/// unboundedly.
const MEMORY_CAP: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Stopped,
    Returned,
    Reverted,
    OutOfSteps,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    /// Empty unless status is Returned or Reverted.
    pub return_data: Vec<u8>,
    pub final_stack: Vec<U256>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("unsupported opcode {mnemonic} at offset {offset}")]
    UnsupportedOp { mnemonic: &'static str, offset: usize },
    #[error("stack underflow at offset {offset}")]
    StackUnderflow { offset: usize },
}

struct Machine<'a> {
    code: &'a [u8],
    calldata: &'a [u8],
    stack: Vec<U256>,
    memory: Vec<u8>,
    storage: HashMap<U256, U256>,
    /// Offsets that JUMP may land on: JUMPDEST opcodes outside immediates.
    jumpdests: Vec<usize>,
}

enum Step {
    Continue(usize),
    Halt(ExecStatus, Vec<u8>),
}

impl<'a> Machine<'a> {
    fn new(code: &'a [u8], calldata: &'a [u8]) -> Self {
        let mut jumpdests = Vec::new();
        let mut pc = 0;
        while pc < code.len() {
            let spec = opcode_info(code[pc]);
            if code[pc] == 0x5b {
                jumpdests.push(pc);
            }
            pc += 1 + spec.immediate_len as usize;
        }
        Machine {
            code,
            calldata,
            stack: Vec::new(),
            memory: Vec::new(),
            storage: HashMap::new(),
            jumpdests,
        }
    }

    fn pop(&mut self, offset: usize) -> Result<U256, InterpError> {
        self.stack.pop().ok_or(InterpError::StackUnderflow { offset })
    }

    fn require_depth(&self, n: usize, offset: usize) -> Result<(), InterpError> {
        if self.stack.len() < n {
            return Err(InterpError::StackUnderflow { offset });
        }
        Ok(())
    }

    /// Grows memory to cover [addr, addr+len); None means the cap was hit
    /// and the caller should Revert.
    fn touch_memory(&mut self, addr: U256, len: usize) -> Option<usize> {
        if len == 0 {
            return Some(0);
        }
        let addr = usize::try_from(addr).ok()?;
        let end = addr.checked_add(len)?;
        if end > MEMORY_CAP {
            return None;
        }
        if self.memory.len() < end {
            self.memory.resize(end, 0);
        }
        Some(addr)
    }

    fn read_word(&self, addr: usize) -> U256 {
        let mut buf = [0u8; 32];
        buf.copy_from_slice(&self.memory[addr..addr + 32]);
        U256::from_be_bytes(buf)
    }

    fn step(&mut self, pc: usize) -> Result<Step, InterpError> {
        let op = self.code[pc];
        let spec = opcode_info(op);
        let next = pc + 1 + spec.immediate_len as usize;
        let revert_empty = || Step::Halt(ExecStatus::Reverted, Vec::new());

        match op {
            0x00 => return Ok(Step::Halt(ExecStatus::Stopped, Vec::new())),
            // Arithmetic subset, all mod 2^256; DIV/MOD by zero give 0.
            0x01..=0x07 if matches!(op, 0x01 | 0x02 | 0x03 | 0x04 | 0x06) => {
                let a = self.pop(pc)?;
                let b = self.pop(pc)?;
                let r = match op {
                    0x01 => a.wrapping_add(b),
                    0x02 => a.wrapping_mul(b),
                    0x03 => a.wrapping_sub(b),
                    0x04 => {
                        if b == 0 {
                            U256::ZERO
                        } else {
                            a / b
                        }
                    }
                    _ => {
                        if b == 0 {
                            U256::ZERO
                        } else {
                            a % b
                        }
                    }
                };
                self.stack.push(r);
            }
            // Comparison and bitwise ops 0x10..=0x1d.
            0x10..=0x1d => {
                let r = match op {
                    0x15 | 0x19 => {
                        let a = self.pop(pc)?;
                        match op {
                            0x15 => U256::from((a == 0) as u8),
                            _ => !a,
                        }
                    }
                    _ => {
                        let a = self.pop(pc)?;
                        let b = self.pop(pc)?;
                        match op {
                            0x10 => U256::from((a < b) as u8),
                            0x11 => U256::from((a > b) as u8),
                            0x12 => U256::from((a.as_i256() < b.as_i256()) as u8),
                            0x13 => U256::from((a.as_i256() > b.as_i256()) as u8),
                            0x14 => U256::from((a == b) as u8),
                            0x16 => a & b,
                            0x17 => a | b,
                            0x18 => a ^ b,
                            0x1a => {
                                // BYTE: i-th byte of b, big-endian index a.
                                if a >= 32 {
                                    U256::ZERO
                                } else {
                                    let i = a.as_usize();
                                    U256::from(b.to_be_bytes()[i])
                                }
                            }
                            0x1b => {
                                if a >= 256 {
                                    U256::ZERO
                                } else {
                                    b << a.as_u32()
                                }
                            }
                            0x1c => {
                                if a >= 256 {
                                    U256::ZERO
                                } else {
                                    b >> a.as_u32()
                                }
                            }
                            _ => {
                                // SAR: arithmetic shift, sign-filled.
                                let signed = b.as_i256();
                                if a >= 256 {
                                    if signed < 0 {
                                        !U256::ZERO
                                    } else {
                                        U256::ZERO
                                    }
                                } else {
                                    (signed >> a.as_u32()).as_u256()
                                }
                            }
                        }
                    }
                };
                self.stack.push(r);
            }
            0x35 => {
                // CALLDATALOAD: 32 bytes from calldata, zero-padded.
                let addr = self.pop(pc)?;
                let mut buf = [0u8; 32];
                if let Ok(start) = usize::try_from(addr) {
                    for (i, slot) in buf.iter_mut().enumerate() {
                        if let Some(&byte) = self.calldata.get(start.wrapping_add(i)) {
                            *slot = byte;
                        }
                    }
                }
                self.stack.push(U256::from_be_bytes(buf));
            }
            0x36 => self.stack.push(U256::from(self.calldata.len() as u64)),
            0x50 => {
                self.pop(pc)?;
            }
            0x51 => {
                let addr = self.pop(pc)?;
                match self.touch_memory(addr, 32) {
                    Some(a) => {
                        let w = self.read_word(a);
                        self.stack.push(w);
                    }
                    None => return Ok(revert_empty()),
                }
            }
            0x52 => {
                let addr = self.pop(pc)?;
                let value = self.pop(pc)?;
                match self.touch_memory(addr, 32) {
                    Some(a) => self.memory[a..a + 32].copy_from_slice(&value.to_be_bytes()),
                    None => return Ok(revert_empty()),
                }
            }
            0x53 => {
                let addr = self.pop(pc)?;
                let value = self.pop(pc)?;
                match self.touch_memory(addr, 1) {
                    Some(a) => self.memory[a] = value.to_be_bytes()[31],
                    None => return Ok(revert_empty()),
                }
            }
            0x54 => {
                let key = self.pop(pc)?;
                let value = self.storage.get(&key).copied().unwrap_or(U256::ZERO);
                self.stack.push(value);
            }
            0x55 => {
                let key = self.pop(pc)?;
                let value = self.pop(pc)?;
                self.storage.insert(key, value);
            }
            0x56 | 0x57 => {
                let target = self.pop(pc)?;
                let taken = if op == 0x57 {
                    let cond = self.pop(pc)?;
                    cond != 0
                } else {
                    true
                };
                if taken {
                    let valid = usize::try_from(target)
                        .ok()
                        .filter(|t| self.jumpdests.binary_search(t).is_ok());
                    return match valid {
                        Some(t) => Ok(Step::Continue(t)),
                        None => Ok(revert_empty()),
                    };
                }
            }
            0x58 => self.stack.push(U256::from(pc as u64)),
            0x5b => {}
            0x5f..=0x7f => {
                // PUSH0..PUSH32; bytes past the end of code read as zero.
                let n = (op - 0x5f) as usize;
                let mut buf = [0u8; 32];
                for i in 0..n {
                    if let Some(&byte) = self.code.get(pc + 1 + i) {
                        buf[32 - n + i] = byte;
                    }
                }
                self.stack.push(U256::from_be_bytes(buf));
            }
            0x80..=0x8f => {
                let n = (op - 0x80) as usize + 1;
                self.require_depth(n, pc)?;
                let value = self.stack[self.stack.len() - n];
                self.stack.push(value);
            }
            0x90..=0x9f => {
                let n = (op - 0x90) as usize + 1;
                self.require_depth(n + 1, pc)?;
                let top = self.stack.len() - 1;
                self.stack.swap(top, top - n);
            }
            0xf3 | 0xfd => {
                let addr = self.pop(pc)?;
                let len = self.pop(pc)?;
                let status = if op == 0xf3 {
                    ExecStatus::Returned
                } else {
                    ExecStatus::Reverted
                };
                let len = match usize::try_from(len) {
                    Ok(l) if l <= MEMORY_CAP => l,
                    _ => return Ok(revert_empty()),
                };
                let data = if len == 0 {
                    Vec::new()
                } else {
                    match self.touch_memory(addr, len) {
                        Some(a) => self.memory[a..a + len].to_vec(),
                        None => return Ok(revert_empty()),
                    }
                };
                return Ok(Step::Halt(status, data));
            }
            _ => {
                return Err(InterpError::UnsupportedOp {
                    mnemonic: spec.mnemonic,
                    offset: pc,
                })
            }
        }
        Ok(Step::Continue(next))
    }
}

/// Runs `code` on `calldata` until it halts, falls off the end (Stopped),
/// or exhausts `step_limit`.
pub fn interp_execute(
    code: &Bytecode,
    calldata: &[u8],
    step_limit: usize,
) -> Result<ExecutionResult, InterpError> {
    let mut machine = Machine::new(code.bytes(), calldata);
    let mut pc = 0;
    let mut steps = step_limit;
    let (status, return_data) = loop {
        if pc >= machine.code.len() {
            break (ExecStatus::Stopped, Vec::new());
        }
        if steps == 0 {
            break (ExecStatus::OutOfSteps, Vec::new());
        }
        steps -= 1;
        match machine.step(pc)? {
            Step::Continue(next) => pc = next,
            Step::Halt(status, data) => break (status, data),
        }
    };
    Ok(ExecutionResult {
        status,
        return_data,
        final_stack: machine.stack,
    })
}
