//! Shanghai-era EVM opcode table.
//!
//! Every byte value maps to exactly one [`OpcodeSpec`]; bytes the hardfork
//! leaves unassigned (including post-Shanghai additions) decode as INVALID
//! terminators rather than errors, because deployed code routinely embeds
//! data in the code section.

/// Byte values for the assigned opcodes.
pub mod op {
    pub const STOP: u8 = 0x00;
    pub const ADD: u8 = 0x01;
    pub const MUL: u8 = 0x02;
    pub const SUB: u8 = 0x03;
    pub const DIV: u8 = 0x04;
    pub const SDIV: u8 = 0x05;
    pub const MOD: u8 = 0x06;
    pub const SMOD: u8 = 0x07;
    pub const ADDMOD: u8 = 0x08;
    pub const MULMOD: u8 = 0x09;
    pub const EXP: u8 = 0x0a;
    pub const SIGNEXTEND: u8 = 0x0b;
    pub const LT: u8 = 0x10;
    pub const GT: u8 = 0x11;
    pub const SLT: u8 = 0x12;
    pub const SGT: u8 = 0x13;
    pub const EQ: u8 = 0x14;
    pub const ISZERO: u8 = 0x15;
    pub const AND: u8 = 0x16;
    pub const OR: u8 = 0x17;
    pub const XOR: u8 = 0x18;
    pub const NOT: u8 = 0x19;
    pub const BYTE: u8 = 0x1a;
    pub const SHL: u8 = 0x1b;
    pub const SHR: u8 = 0x1c;
    pub const SAR: u8 = 0x1d;
    pub const KECCAK256: u8 = 0x20;
    pub const ADDRESS: u8 = 0x30;
    pub const BALANCE: u8 = 0x31;
    pub const ORIGIN: u8 = 0x32;
    pub const CALLER: u8 = 0x33;
    pub const CALLVALUE: u8 = 0x34;
    pub const CALLDATALOAD: u8 = 0x35;
    pub const CALLDATASIZE: u8 = 0x36;
    pub const CALLDATACOPY: u8 = 0x37;
    pub const CODESIZE: u8 = 0x38;
    pub const CODECOPY: u8 = 0x39;
    pub const GASPRICE: u8 = 0x3a;
    pub const EXTCODESIZE: u8 = 0x3b;
    pub const EXTCODECOPY: u8 = 0x3c;
    pub const RETURNDATASIZE: u8 = 0x3d;
    pub const RETURNDATACOPY: u8 = 0x3e;
    pub const EXTCODEHASH: u8 = 0x3f;
    pub const BLOCKHASH: u8 = 0x40;
    pub const COINBASE: u8 = 0x41;
    pub const TIMESTAMP: u8 = 0x42;
    pub const NUMBER: u8 = 0x43;
    pub const PREVRANDAO: u8 = 0x44;
    pub const GASLIMIT: u8 = 0x45;
    pub const CHAINID: u8 = 0x46;
    pub const SELFBALANCE: u8 = 0x47;
    pub const BASEFEE: u8 = 0x48;
    pub const POP: u8 = 0x50;
    pub const MLOAD: u8 = 0x51;
    pub const MSTORE: u8 = 0x52;
    pub const MSTORE8: u8 = 0x53;
    pub const SLOAD: u8 = 0x54;
    pub const SSTORE: u8 = 0x55;
    pub const JUMP: u8 = 0x56;
    pub const JUMPI: u8 = 0x57;
    pub const PC: u8 = 0x58;
    pub const MSIZE: u8 = 0x59;
    pub const GAS: u8 = 0x5a;
    pub const JUMPDEST: u8 = 0x5b;
    pub const PUSH0: u8 = 0x5f;
    pub const PUSH1: u8 = 0x60;
    pub const PUSH2: u8 = 0x61;
    pub const PUSH4: u8 = 0x63;
    pub const PUSH20: u8 = 0x73;
    pub const PUSH32: u8 = 0x7f;
    pub const DUP1: u8 = 0x80;
    pub const DUP16: u8 = 0x8f;
    pub const SWAP1: u8 = 0x90;
    pub const SWAP16: u8 = 0x9f;
    pub const LOG0: u8 = 0xa0;
    pub const LOG1: u8 = 0xa1;
    pub const LOG2: u8 = 0xa2;
    pub const LOG3: u8 = 0xa3;
    pub const LOG4: u8 = 0xa4;
    pub const CREATE: u8 = 0xf0;
    pub const CALL: u8 = 0xf1;
    pub const CALLCODE: u8 = 0xf2;
    pub const RETURN: u8 = 0xf3;
    pub const DELEGATECALL: u8 = 0xf4;
    pub const CREATE2: u8 = 0xf5;
    pub const STATICCALL: u8 = 0xfa;
    pub const REVERT: u8 = 0xfd;
    pub const INVALID: u8 = 0xfe;
    pub const SELFDESTRUCT: u8 = 0xff;
}

/// Effect categories used by the node featurizer. Each byte value belongs to
/// exactly one category; bytes outside the named ranges count as `System`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Arithmetic,
    Comparison,
    Keccak,
    Environment,
    BlockInfo,
    Pop,
    Memory,
    Storage,
    Flow,
    Push,
    Dup,
    Swap,
    Log,
    System,
}

impl Category {
    pub const COUNT: usize = 14;

    pub const fn of_byte(byte: u8) -> Category {
        match byte {
            0x01..=0x0b => Category::Arithmetic,
            0x10..=0x1d => Category::Comparison,
            0x20 => Category::Keccak,
            0x30..=0x3f => Category::Environment,
            0x40..=0x4a => Category::BlockInfo,
            0x50 => Category::Pop,
            0x51..=0x53 | 0x59 => Category::Memory,
            0x54 | 0x55 => Category::Storage,
            0x56..=0x58 | 0x5a | 0x5b => Category::Flow,
            0x5f..=0x7f => Category::Push,
            0x80..=0x8f => Category::Dup,
            0x90..=0x9f => Category::Swap,
            0xa0..=0xa4 => Category::Log,
            _ => Category::System,
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }
}

/// Static description of one byte value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpcodeSpec {
    pub byte_value: u8,
    pub mnemonic: &'static str,
    /// Immediate operand length in bytes; nonzero only for PUSH1..PUSH32.
    pub immediate_len: u8,
    pub stack_pops: u8,
    pub stack_pushes: u8,
    pub category: Category,
    /// True when control never falls through to the next instruction.
    pub is_terminator: bool,
}

pub fn opcode_info(byte: u8) -> &'static OpcodeSpec {
    &TABLE[byte as usize]
}

pub fn is_push(byte: u8) -> bool {
    (op::PUSH0..=op::PUSH32).contains(&byte)
}

/// Smallest PUSH opcode whose immediate holds `value`.
pub fn push_for_value(value: u128) -> u8 {
    let width = 16 - (value.leading_zeros() / 8) as usize;
    if width == 0 {
        op::PUSH0
    } else {
        op::PUSH1 + (width as u8 - 1)
    }
}

static TABLE: [OpcodeSpec; 256] = build_table();

const PUSH_NAMES: [&str; 33] = [
    "PUSH0", "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7",
    "PUSH8", "PUSH9", "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14",
    "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21",
    "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
    "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];

const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9",
    "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];

const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8",
    "SWAP9", "SWAP10", "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15",
    "SWAP16",
];

const fn assigned(byte: u8, mnemonic: &'static str, pops: u8, pushes: u8) -> OpcodeSpec {
    OpcodeSpec {
        byte_value: byte,
        mnemonic,
        immediate_len: if byte >= op::PUSH1 && byte <= op::PUSH32 {
            byte - op::PUSH1 + 1
        } else {
            0
        },
        stack_pops: pops,
        stack_pushes: pushes,
        category: Category::of_byte(byte),
        is_terminator: matches!(
            byte,
            op::STOP | op::JUMP | op::JUMPI | op::RETURN | op::REVERT | op::INVALID | op::SELFDESTRUCT
        ),
    }
}

const fn build_table() -> [OpcodeSpec; 256] {
    let mut t = [assigned(0, "INVALID", 0, 0); 256];
    let mut i = 0usize;
    while i < 256 {
        t[i] = OpcodeSpec {
            byte_value: i as u8,
            mnemonic: "INVALID",
            immediate_len: 0,
            stack_pops: 0,
            stack_pushes: 0,
            category: Category::of_byte(i as u8),
            is_terminator: true,
        };
        i += 1;
    }

    t[op::STOP as usize] = assigned(op::STOP, "STOP", 0, 0);
    t[op::ADD as usize] = assigned(op::ADD, "ADD", 2, 1);
    t[op::MUL as usize] = assigned(op::MUL, "MUL", 2, 1);
    t[op::SUB as usize] = assigned(op::SUB, "SUB", 2, 1);
    t[op::DIV as usize] = assigned(op::DIV, "DIV", 2, 1);
    t[op::SDIV as usize] = assigned(op::SDIV, "SDIV", 2, 1);
    t[op::MOD as usize] = assigned(op::MOD, "MOD", 2, 1);
    t[op::SMOD as usize] = assigned(op::SMOD, "SMOD", 2, 1);
    t[op::ADDMOD as usize] = assigned(op::ADDMOD, "ADDMOD", 3, 1);
    t[op::MULMOD as usize] = assigned(op::MULMOD, "MULMOD", 3, 1);
    t[op::EXP as usize] = assigned(op::EXP, "EXP", 2, 1);
    t[op::SIGNEXTEND as usize] = assigned(op::SIGNEXTEND, "SIGNEXTEND", 2, 1);
    t[op::LT as usize] = assigned(op::LT, "LT", 2, 1);
    t[op::GT as usize] = assigned(op::GT, "GT", 2, 1);
    t[op::SLT as usize] = assigned(op::SLT, "SLT", 2, 1);
    t[op::SGT as usize] = assigned(op::SGT, "SGT", 2, 1);
    t[op::EQ as usize] = assigned(op::EQ, "EQ", 2, 1);
    t[op::ISZERO as usize] = assigned(op::ISZERO, "ISZERO", 1, 1);
    t[op::AND as usize] = assigned(op::AND, "AND", 2, 1);
    t[op::OR as usize] = assigned(op::OR, "OR", 2, 1);
    t[op::XOR as usize] = assigned(op::XOR, "XOR", 2, 1);
    t[op::NOT as usize] = assigned(op::NOT, "NOT", 1, 1);
    t[op::BYTE as usize] = assigned(op::BYTE, "BYTE", 2, 1);
    t[op::SHL as usize] = assigned(op::SHL, "SHL", 2, 1);
    t[op::SHR as usize] = assigned(op::SHR, "SHR", 2, 1);
    t[op::SAR as usize] = assigned(op::SAR, "SAR", 2, 1);
    t[op::KECCAK256 as usize] = assigned(op::KECCAK256, "KECCAK256", 2, 1);
    t[op::ADDRESS as usize] = assigned(op::ADDRESS, "ADDRESS", 0, 1);
    t[op::BALANCE as usize] = assigned(op::BALANCE, "BALANCE", 1, 1);
    t[op::ORIGIN as usize] = assigned(op::ORIGIN, "ORIGIN", 0, 1);
    t[op::CALLER as usize] = assigned(op::CALLER, "CALLER", 0, 1);
    t[op::CALLVALUE as usize] = assigned(op::CALLVALUE, "CALLVALUE", 0, 1);
    t[op::CALLDATALOAD as usize] = assigned(op::CALLDATALOAD, "CALLDATALOAD", 1, 1);
    t[op::CALLDATASIZE as usize] = assigned(op::CALLDATASIZE, "CALLDATASIZE", 0, 1);
    t[op::CALLDATACOPY as usize] = assigned(op::CALLDATACOPY, "CALLDATACOPY", 3, 0);
    t[op::CODESIZE as usize] = assigned(op::CODESIZE, "CODESIZE", 0, 1);
    t[op::CODECOPY as usize] = assigned(op::CODECOPY, "CODECOPY", 3, 0);
    t[op::GASPRICE as usize] = assigned(op::GASPRICE, "GASPRICE", 0, 1);
    t[op::EXTCODESIZE as usize] = assigned(op::EXTCODESIZE, "EXTCODESIZE", 1, 1);
    t[op::EXTCODECOPY as usize] = assigned(op::EXTCODECOPY, "EXTCODECOPY", 4, 0);
    t[op::RETURNDATASIZE as usize] = assigned(op::RETURNDATASIZE, "RETURNDATASIZE", 0, 1);
    t[op::RETURNDATACOPY as usize] = assigned(op::RETURNDATACOPY, "RETURNDATACOPY", 3, 0);
    t[op::EXTCODEHASH as usize] = assigned(op::EXTCODEHASH, "EXTCODEHASH", 1, 1);
    t[op::BLOCKHASH as usize] = assigned(op::BLOCKHASH, "BLOCKHASH", 1, 1);
    t[op::COINBASE as usize] = assigned(op::COINBASE, "COINBASE", 0, 1);
    t[op::TIMESTAMP as usize] = assigned(op::TIMESTAMP, "TIMESTAMP", 0, 1);
    t[op::NUMBER as usize] = assigned(op::NUMBER, "NUMBER", 0, 1);
    t[op::PREVRANDAO as usize] = assigned(op::PREVRANDAO, "PREVRANDAO", 0, 1);
    t[op::GASLIMIT as usize] = assigned(op::GASLIMIT, "GASLIMIT", 0, 1);
    t[op::CHAINID as usize] = assigned(op::CHAINID, "CHAINID", 0, 1);
    t[op::SELFBALANCE as usize] = assigned(op::SELFBALANCE, "SELFBALANCE", 0, 1);
    t[op::BASEFEE as usize] = assigned(op::BASEFEE, "BASEFEE", 0, 1);
    t[op::POP as usize] = assigned(op::POP, "POP", 1, 0);
    t[op::MLOAD as usize] = assigned(op::MLOAD, "MLOAD", 1, 1);
    t[op::MSTORE as usize] = assigned(op::MSTORE, "MSTORE", 2, 0);
    t[op::MSTORE8 as usize] = assigned(op::MSTORE8, "MSTORE8", 2, 0);
    t[op::SLOAD as usize] = assigned(op::SLOAD, "SLOAD", 1, 1);
    t[op::SSTORE as usize] = assigned(op::SSTORE, "SSTORE", 2, 0);
    t[op::JUMP as usize] = assigned(op::JUMP, "JUMP", 1, 0);
    t[op::JUMPI as usize] = assigned(op::JUMPI, "JUMPI", 2, 0);
    t[op::PC as usize] = assigned(op::PC, "PC", 0, 1);
    t[op::MSIZE as usize] = assigned(op::MSIZE, "MSIZE", 0, 1);
    t[op::GAS as usize] = assigned(op::GAS, "GAS", 0, 1);
    t[op::JUMPDEST as usize] = assigned(op::JUMPDEST, "JUMPDEST", 0, 0);

    let mut n = 0usize;
    while n <= 32 {
        let byte = op::PUSH0 + n as u8;
        t[byte as usize] = assigned(byte, PUSH_NAMES[n], 0, 1);
        n += 1;
    }
    let mut n = 0usize;
    while n < 16 {
        let byte = op::DUP1 + n as u8;
        t[byte as usize] = assigned(byte, DUP_NAMES[n], n as u8 + 1, n as u8 + 2);
        n += 1;
    }
    let mut n = 0usize;
    while n < 16 {
        let byte = op::SWAP1 + n as u8;
        t[byte as usize] = assigned(byte, SWAP_NAMES[n], n as u8 + 2, n as u8 + 2);
        n += 1;
    }

    t[op::LOG0 as usize] = assigned(op::LOG0, "LOG0", 2, 0);
    t[op::LOG1 as usize] = assigned(op::LOG1, "LOG1", 3, 0);
    t[op::LOG2 as usize] = assigned(op::LOG2, "LOG2", 4, 0);
    t[op::LOG3 as usize] = assigned(op::LOG3, "LOG3", 5, 0);
    t[op::LOG4 as usize] = assigned(op::LOG4, "LOG4", 6, 0);
    t[op::CREATE as usize] = assigned(op::CREATE, "CREATE", 3, 1);
    t[op::CALL as usize] = assigned(op::CALL, "CALL", 7, 1);
    t[op::CALLCODE as usize] = assigned(op::CALLCODE, "CALLCODE", 7, 1);
    t[op::RETURN as usize] = assigned(op::RETURN, "RETURN", 2, 0);
    t[op::DELEGATECALL as usize] = assigned(op::DELEGATECALL, "DELEGATECALL", 6, 1);
    t[op::CREATE2 as usize] = assigned(op::CREATE2, "CREATE2", 4, 1);
    t[op::STATICCALL as usize] = assigned(op::STATICCALL, "STATICCALL", 6, 1);
    t[op::REVERT as usize] = assigned(op::REVERT, "REVERT", 2, 0);
    t[op::SELFDESTRUCT as usize] = assigned(op::SELFDESTRUCT, "SELFDESTRUCT", 1, 0);
    // 0xfe keeps the INVALID default; it is the one byte where that spelling
    // is the assigned opcode rather than a fallback.

    t
}
