use thiserror::Error;

/// Errors produced by the backend, the encoding layer and the runtimes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("key mismatch: ciphertext under key {ct_key}, operation used key {op_key}")]
    KeyMismatch { ct_key: u64, op_key: u64 },

    #[error("slot kind mismatch: {0}")]
    SlotMismatch(String),

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("SIMD multiplicative depth budget exhausted")]
    DepthExhausted,

    #[error("word layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("fingerprint scheme error: {0}")]
    Scheme(String),

    #[error("circuit compile error: {0}")]
    Compile(String),

    #[error("execution plan error: {0}")]
    Plan(String),

    #[error("SIMD program rejected by restriction lint: {0:?}")]
    LintRejected(Vec<crate::simd_fp::Violation>),

    #[error("unsupported SIMD step: {0}")]
    UnsupportedStep(String),

    #[error("protocol request malformed: {0}")]
    Request(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
