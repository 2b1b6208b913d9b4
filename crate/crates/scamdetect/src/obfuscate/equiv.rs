//! Differential testing of two bytecode programs over seeded calldata.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::disasm::Bytecode;

use super::interp::{interp_execute, InterpError, DEFAULT_STEP_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    /// One of the runs hit an opcode outside the interpreter subset; the
    /// pair is excluded from equivalence statistics, not failed.
    Unsupported { op: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not_equivalent",
            Verdict::Unsupported { .. } => "unsupported",
        }
    }
}

/// Runs both programs on `num_vectors` random calldata inputs (lengths
/// 0..=64) and compares full execution results. Stack underflows are
/// propagated as errors: a corpus program that underflows is a bug worth
/// hearing about, not a silent match.
pub fn check_equivalence(
    a: &Bytecode,
    b: &Bytecode,
    num_vectors: usize,
    seed: u64,
) -> Result<Verdict, InterpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..num_vectors {
        let len = rng.gen_range(0usize..=64);
        let calldata: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let ra = interp_execute(a, &calldata, DEFAULT_STEP_LIMIT);
        let rb = interp_execute(b, &calldata, DEFAULT_STEP_LIMIT);
        match (ra, rb) {
            (Err(InterpError::UnsupportedOp { mnemonic, .. }), _)
            | (_, Err(InterpError::UnsupportedOp { mnemonic, .. })) => {
                return Ok(Verdict::Unsupported { op: mnemonic.to_string() })
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
            (Ok(x), Ok(y)) => {
                if x != y {
                    return Ok(Verdict::NotEquivalent);
                }
            }
        }
    }
    Ok(Verdict::Equivalent)
}
