//! Symbolic models over SOM label sequences.

mod oracle;
mod vmm;

pub use oracle::{fo_build, fo_walk, FactorOracle, OracleWalkConfig, OracleWalker};
pub use vmm::{vmm_build, vmm_build_with_alphabet, vmm_predict, vmm_sample, VmmModel, DEFAULT_MAX_ORDER};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("max order must be at least 1")]
    InvalidOrder,
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: usize },
    #[error("continuity {0} outside [0, 1]")]
    InvalidContinuity(f64),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
