//! Contract errors shared across the crate.

/// Violations of simulator and protocol contracts.
///
/// These are misuse signals, not protocol outcomes: an honest or adversarial
/// run that merely fails authentication produces a `Reject`, never an error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("qubit already consumed; linear-use contract forbids a second interaction")]
    QubitConsumed,
    #[error("hash input length mismatch: expected {expected} bits, got {got}")]
    HashInputLength { expected: usize, got: usize },
    #[error("refusing exhaustive enumeration: key_len {key_len} exceeds cap {cap} (2^{key_len} candidates)")]
    KeyLenCapExceeded { key_len: usize, cap: usize },
    #[error("key space has no members")]
    EmptyKeySpace,
    #[error("survivor sets built over different key spaces")]
    KeySpaceMismatch,
    #[error("operation not defined under variant {variant}")]
    WrongVariant { variant: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} qubits, got {got}")]
    QubitCount { expected: usize, got: usize },
    #[error("observation index {index} out of range for d = {d}")]
    ObservationIndex { index: usize, d: usize },
    #[error("fixed basis pattern has {got} entries, session has d = {expected}")]
    PatternLength { expected: usize, got: usize },
    #[error("key length mismatch: expected {expected} bits, got {got}")]
    KeyLength { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
