use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("duplicate txid {0}")]
    DuplicateTxid(String),

    #[error("negative value {value} in transaction {txid}")]
    NegativeValue { txid: String, value: i128 },

    #[error("transaction {txid}: {message}")]
    InvalidTransaction { txid: String, message: String },

    #[error("invalid address {0:?}")]
    InvalidAddress(String),

    #[error("duplicate address {0}")]
    DuplicateAddress(String),

    #[error("unknown wallet category {0:?}")]
    UnknownCategory(String),

    #[error("invalid field {field}: {message}")]
    InvalidField {
        field: &'static str,
        message: String,
    },

    #[error("no price for {0}")]
    MissingPrice(NaiveDate),

    #[error("roster is empty")]
    EmptyRoster,

    #[error("day range {start}..{end} is reversed")]
    ReversedRange { start: NaiveDate, end: NaiveDate },

    #[error("prior cycle has zero peak volume")]
    DegenerateCycle,

    #[error("volume series has no peak")]
    NoPeak,

    #[error("phase {start}..{end} is shorter than one month")]
    PhaseTooShort { start: NaiveDate, end: NaiveDate },

    #[error("no flow between {0} and {1}")]
    NoFlow(String, String),

    #[error("infeasible simulation config: {0}")]
    InfeasibleConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable kind, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. } => "malformed",
            Error::DuplicateTxid(_) => "duplicate_txid",
            Error::NegativeValue { .. } => "negative_value",
            Error::InvalidTransaction { .. } => "invalid_transaction",
            Error::InvalidAddress(_) => "invalid_address",
            Error::DuplicateAddress(_) => "duplicate_address",
            Error::UnknownCategory(_) => "unknown_category",
            Error::InvalidField { .. } => "invalid_field",
            Error::MissingPrice(_) => "missing_price",
            Error::EmptyRoster => "empty_roster",
            Error::ReversedRange { .. } => "reversed_range",
            Error::DegenerateCycle => "degenerate_cycle",
            Error::NoPeak => "no_peak",
            Error::PhaseTooShort { .. } => "phase_too_short",
            Error::NoFlow(..) => "no_flow",
            Error::InfeasibleConfig(_) => "infeasible_config",
            Error::Invariant(_) => "invariant",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
