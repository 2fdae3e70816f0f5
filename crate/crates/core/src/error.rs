use thiserror::Error;

/// Crate-wide error type. Scalar payloads are carried as `f64` regardless of
/// the working precision.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("consumption {x} is negative; revenue is defined for x >= 0")]
    NegativeConsumption { x: f64 },

    #[error("revenue derivative is singular at x = {x}")]
    DerivativeSingularity { x: f64 },

    #[error("value {value} outside [{min}, {max}]")]
    OutOfBounds { value: f64, min: f64, max: f64 },

    #[error("expected a nonempty sequence")]
    EmptySequence,

    #[error("consumption has {consumption} entries but loads has {loads}")]
    LengthMismatch { consumption: usize, loads: usize },

    #[error("round {t} outside the decision range [1, {max_t}]")]
    RoundOutOfRange { t: u32, max_t: u32 },

    #[error(
        "consumption grid spacing {spacing} exceeds 2*ramp_delta = {limit}; \
         no movement between grid nodes is feasible"
    )]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("policy was trained for horizon {policy} but the scenario has horizon {config}")]
    HorizonMismatch { policy: u32, config: u32 },

    #[error("non-finite input {name} = {value}")]
    NonFiniteInput { name: &'static str, value: f64 },

    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed file: {0}")]
    FileFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
