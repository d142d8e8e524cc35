use thiserror::Error;

/// Errors surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("corpus validation failed: {0}")]
    Validation(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("training data contains a single class for strategy {0}")]
    SingleClass(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("undefined correlation: zero variance in {0}")]
    ZeroVariance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("solver breakdown: {msg} (condition estimate {cond:.3e})")]
    Solver { msg: String, cond: f64 },

    #[error("empty subthread for player {0}")]
    EmptySubthread(String),

    #[error("no usable threads for evaluation")]
    NoUsableThreads,

    #[error("infeasible synth config: {0}")]
    InfeasibleConfig(String),

    #[error("model file malformed: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
