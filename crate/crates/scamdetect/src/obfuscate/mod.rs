//! Semantics-preserving bytecode transformations for robustness testing:
//! junk insertion, block reordering, and instruction substitution, with a
//! subset interpreter as the equivalence oracle. Transformations refuse
//! code whose jumps they cannot prove rewritable.

mod equiv;
mod interp;
mod passes;
pub(crate) mod program;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cfg::build_cfg;
use crate::disasm::{disassemble, Bytecode};

pub use equiv::{check_equivalence, Verdict};
pub use interp::{
    interp_execute, ExecStatus, ExecutionResult, InterpError, DEFAULT_STEP_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    Junk,
    Reorder,
    Substitute,
}

impl std::str::FromStr for Pass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "junk" => Ok(Pass::Junk),
            "reorder" => Ok(Pass::Reorder),
            "substitute" => Ok(Pass::Substitute),
            other => Err(format!("unknown pass: {other}")),
        }
    }
}

impl std::fmt::Display for Pass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pass::Junk => "junk",
            Pass::Reorder => "reorder",
            Pass::Substitute => "substitute",
        })
    }
}

/// Fields are declared in key order so serialized configs diff cleanly.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObfConfig {
    /// Fraction of blocks touched by Junk and Substitute, in (0, 1].
    #[serde(default = "default_intensity")]
    pub intensity: f64,
    /// Applied in order; empty means identity.
    pub passes: Vec<Pass>,
    #[serde(default)]
    pub seed: u64,
}

fn default_intensity() -> f64 {
    0.5
}

impl Default for ObfConfig {
    fn default() -> Self {
        ObfConfig { intensity: 0.5, passes: Vec::new(), seed: 0 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObfError {
    #[error("code has jumps whose targets cannot be rewritten safely")]
    UnresolvableJumps,
    #[error("offset rewriting did not converge")]
    FixpointDivergence,
    #[error("intensity must be in (0, 1]")]
    InvalidIntensity,
}

/// Applies the configured passes. The input must have a fully resolved
/// CFG where every jump takes its target from a rewritable PUSH in the
/// same block; anything else is refused rather than risked.
pub fn obfuscate(code: &Bytecode, config: &ObfConfig) -> Result<Bytecode, ObfError> {
    if config.passes.is_empty() || code.is_empty() {
        return Ok(code.clone());
    }
    if !(config.intensity > 0.0 && config.intensity <= 1.0) {
        return Err(ObfError::InvalidIntensity);
    }
    let stream = disassemble(code);
    let cfg = build_cfg(&stream).expect("non-empty code yields a CFG");
    let mut program = program::lower(&stream, &cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for pass in &config.passes {
        match pass {
            Pass::Junk => passes::junk(&mut program, &mut rng, config.intensity),
            Pass::Reorder => passes::reorder(&mut program, &mut rng),
            Pass::Substitute => passes::substitute(&mut program, &mut rng, config.intensity),
        }
    }
    let (bytes, _) = program::emit(&mut program)?;
    Ok(Bytecode::new(bytes))
}
