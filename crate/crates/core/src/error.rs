use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network is invalid: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid state `{state}` for `{variable}` (valid states: {})", .valid.join(", "))]
    InvalidState {
        variable: String,
        state: String,
        valid: Vec<String>,
    },

    #[error("zero-probability evidence: the observed configuration is impossible under the network")]
    ZeroProbabilityEvidence,

    #[error("oracle too large: joint state space {size} exceeds cap {cap}")]
    OracleTooLarge { size: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    /// Schema violations found while loading a document, each with a field path.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("classification error: {0}")]
    Classification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no eligible positives")]
    NoEligiblePositives,

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("AUC undefined: test set contains a single class")]
    AucUndefined,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
