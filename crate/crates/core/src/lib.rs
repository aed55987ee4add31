//! Learning LTL formulae over finite traces from positive and negative
//! examples.
//!
//! The learner enumerates formulae bottom-up by cost. Each candidate is
//! represented by its characteristic matrix: one 64-bit word per example
//! trace, bit `63 - j` recording whether the formula holds at position `j`.
//! Temporal connectives become shifts, with `F` and `U` computed by
//! exponential propagation in six rounds. Candidates enter the language cache
//! only if their 126-bit fingerprint is new. Specifications too large for one
//! enumerator call are split and recombined by [`dnc`].

pub mod benchgen;
pub mod bitsem;
pub mod cache;
pub mod dnc;
pub mod enumerator;
pub mod formula;
pub mod oracle;
pub mod trace;

use thiserror::Error;

pub use formula::{CostHomomorphism, Formula};
pub use trace::{Alphabet, Specification, Trace};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("positive trace {positive} also occurs as negative trace {negative}")]
    OverlappingTrace { positive: usize, negative: usize },
    #[error("cannot represent {0}")]
    Unrepresentable(String),
    #[error("empty-positive-set: no traces to overfit")]
    EmptyPositiveSet,
    #[error("the empty trace satisfies no formula and cannot be a positive example")]
    EmptyPositiveTrace,
    #[error("specification has {got} traces, more than the limit of {limit}")]
    TooManyTraces { got: usize, limit: usize },
    #[error("trace of length {got} exceeds the limit of {limit}")]
    TraceTooLong { got: usize, limit: usize },
    #[error("trace uses propositions outside the alphabet")]
    OutsideAlphabet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no formula within cost ceiling {0}")]
    CeilingExceeded(u64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("generator: {0}")]
    Generator(String),
    #[error("split window exhausted at {window}: {detail}")]
    WindowExhausted { window: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
