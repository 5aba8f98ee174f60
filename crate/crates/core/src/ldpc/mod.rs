//! Protograph LDPC codes: lifting, encoding, sp rate adaptation,
//! belief-propagation decoding and hash verification.

pub mod decoder;
pub mod encoder;
pub mod expand;
pub mod io;
pub mod protograph;
pub mod rate;
pub mod verify;

pub use decoder::{decode, DecodeResult, Decoder, DecoderConfig, LLR_CLAMP};
pub use encoder::Encoder;
pub use expand::{expand_protograph, ExpandedCode, GirthTarget, ParityCheck};
pub use protograph::{Protograph, DEFAULT_LIFT, DEFAULT_PROTOGRAPH};
pub use rate::{choose_sp, sp_counts, RateAdaptation};
pub use verify::{verify, Digest, ToeplitzHash};

#[derive(Debug, thiserror::Error)]
pub enum LdpcError {
    #[error("malformed code description: {0}")]
    Format(String),
    #[error("lift size {0} is invalid")]
    InvalidLift(usize),
    #[error("no lifting of size {lift} reaches girth {girth}; try a larger lift")]
    InfeasibleGirth { lift: usize, girth: usize },
    #[error("encoder construction failed: {0}")]
    EncoderConstruction(String),
    #[error("target rate {0} must lie strictly between 0 and 1")]
    InvalidRate(f64),
    #[error("target rate {target} needs {needed} {kind} positions, only {available} available")]
    InfeasibleRate {
        target: f64,
        kind: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
