//! Static analysis toolkit for EVM bytecode aimed at scam screening:
//! disassembly, control flow recovery, graph featurization, small
//! from-scratch graph classifiers, semantics-preserving obfuscation for
//! robustness testing, and dataset plumbing.

pub mod cfg;
pub mod data;
pub mod disasm;
pub mod features;
pub mod model;
pub mod num;
pub mod obfuscate;
pub mod pipeline;

pub use num::Scalar;

/// Concrete aliases for the default f64 instantiation of the numeric core.
pub type Matrix = model::DenseMatrix<f64>;
pub type Sample = features::GraphSample<f64>;
pub type Features = features::NodeFeatures<f64>;
pub type Histogram = features::OpcodeHistogram<f64>;
pub type Model = model::ModelParams<f64>;
pub type Report = model::TrainReport<f64>;
