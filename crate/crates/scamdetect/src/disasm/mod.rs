//! Linear EVM bytecode disassembly.
//!
//! Decoding is total: unknown bytes become INVALID instructions and a PUSH
//! whose immediate runs past end-of-code is zero-padded on the right and
//! flagged, mirroring the zero bytes the EVM reads past the code end. The
//! original bytes can always be reconstructed from the stream.

pub mod opcode;

use thiserror::Error;

pub use opcode::{opcode_info, Category, OpcodeSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bytecode {
    bytes: Vec<u8>,
    origin: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexError {
    #[error("odd number of hex digits")]
    OddLength,
    #[error("non-hex character at index {index}")]
    NonHexCharacter { index: usize },
}

impl Bytecode {
    pub fn new(bytes: Vec<u8>) -> Self {
        Bytecode { bytes, origin: None }
    }

    pub fn with_origin(bytes: Vec<u8>, origin: impl Into<String>) -> Self {
        Bytecode {
            bytes,
            origin: Some(origin.into()),
        }
    }

    /// Decodes hex text, accepting an optional `0x` prefix and surrounding
    /// whitespace. Error indices refer to the trimmed input.
    pub fn parse_hex(text: &str) -> Result<Self, HexError> {
        let trimmed = text.trim();
        let (digits, base) = match trimmed.strip_prefix("0x") {
            Some(rest) => (rest, 2),
            None => (trimmed, 0),
        };
        match hex::decode(digits) {
            Ok(bytes) => Ok(Bytecode::new(bytes)),
            Err(hex::FromHexError::OddLength) => Err(HexError::OddLength),
            Err(hex::FromHexError::InvalidHexCharacter { index, .. }) => {
                Err(HexError::NonHexCharacter { index: index + base })
            }
            Err(hex::FromHexError::InvalidStringLength) => unreachable!("decode into Vec"),
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub spec: &'static OpcodeSpec,
    /// Immediate operand; always `spec.immediate_len` bytes, zero-padded on
    /// the right when `truncated`.
    pub immediate: Vec<u8>,
    pub truncated: bool,
}

impl Instruction {
    pub fn byte_value(&self) -> u8 {
        self.spec.byte_value
    }

    /// Immediate interpreted as a big-endian integer, saturating at
    /// `u128::MAX` when the high bytes of a wide PUSH overflow it. Only
    /// plausible jump targets fit in a `u128`, so saturation never loses a
    /// resolvable target.
    pub fn immediate_value(&self) -> u128 {
        let bytes = &self.immediate;
        if bytes.len() > 16 && bytes[..bytes.len() - 16].iter().any(|&b| b != 0) {
            return u128::MAX;
        }
        let mut v = 0u128;
        for &b in &bytes[bytes.len().saturating_sub(16)..] {
            v = (v << 8) | b as u128;
        }
        v
    }

    /// Encoded length in bytes as laid out in the original code.
    pub fn encoded_len(&self, code_len: usize) -> usize {
        if self.truncated {
            code_len - self.offset
        } else {
            1 + self.spec.immediate_len as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionStream {
    pub instructions: Vec<Instruction>,
    pub code_len: usize,
}

impl InstructionStream {
    /// Reconstructs the exact input bytes; a truncated instruction emits
    /// only the immediate bytes that were present.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.code_len);
        for instr in &self.instructions {
            out.push(instr.spec.byte_value);
            if instr.truncated {
                let present = self.code_len - instr.offset - 1;
                out.extend_from_slice(&instr.immediate[..present]);
            } else {
                out.extend_from_slice(&instr.immediate);
            }
        }
        out
    }
}

/// Linear decode from offset 0. Total: never fails on any byte string.
pub fn disassemble(code: &Bytecode) -> InstructionStream {
    let bytes = code.bytes();
    let mut instructions = Vec::new();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let spec = opcode_info(bytes[offset]);
        let imm_len = spec.immediate_len as usize;
        let imm_start = offset + 1;
        let imm_end = imm_start + imm_len;
        let (immediate, truncated) = if imm_end <= bytes.len() {
            (bytes[imm_start..imm_end].to_vec(), false)
        } else {
            let mut imm = bytes[imm_start.min(bytes.len())..].to_vec();
            imm.resize(imm_len, 0);
            (imm, true)
        };
        instructions.push(Instruction {
            offset,
            spec,
            immediate,
            truncated,
        });
        offset = imm_end;
    }
    InstructionStream {
        instructions,
        code_len: bytes.len(),
    }
}

/// Drops a trailing compiler metadata blob when one is plausibly present:
/// the last two bytes read big-endian as a length L, the L bytes before
/// them must fit and start with a CBOR map header (0xa1 or 0xa2).
pub fn strip_metadata(code: &Bytecode) -> Bytecode {
    let bytes = code.bytes();
    if bytes.len() >= 2 {
        let l = u16::from_be_bytes([bytes[bytes.len() - 2], bytes[bytes.len() - 1]]) as usize;
        if l >= 1 && l + 2 <= bytes.len() {
            let blob_start = bytes.len() - 2 - l;
            if bytes[blob_start] == 0xa1 || bytes[blob_start] == 0xa2 {
                return Bytecode {
                    bytes: bytes[..blob_start].to_vec(),
                    origin: code.origin.clone(),
                };
            }
        }
    }
    code.clone()
}
