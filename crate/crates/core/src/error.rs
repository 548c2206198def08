use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing values: {}", format_missing(.missing))]
    MissingValues { missing: Vec<(String, String)> },

    #[error("column '{column}' has zero variance")]
    ZeroVariance { column: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("power iteration for component {component} did not converge (residual {residual:e})")]
    Convergence { component: usize, residual: f64 },

    #[error("team '{team}' has zero total minutes")]
    Aggregation { team: String },

    #[error("unknown entity '{0}'")]
    Lookup(String),

    #[error("design matrix is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("insufficient data: {observations} observations for {terms} terms")]
    InsufficientData { observations: usize, terms: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_missing(missing: &[(String, String)]) -> String {
    missing
        .iter()
        .map(|(entity, stat)| format!("({entity}, {stat})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) | Error::Config(_) => ErrorClass::Usage,
            Error::Convergence { .. } | Error::RankDeficient { .. } | Error::Domain(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Data,
        }
    }

    /// Short stable identifier for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::MissingValues { .. } => "missing_values",
            Error::ZeroVariance { .. } => "zero_variance",
            Error::Parameter(_) => "parameter",
            Error::Convergence { .. } => "convergence",
            Error::Aggregation { .. } => "aggregation",
            Error::Lookup(_) => "lookup",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
