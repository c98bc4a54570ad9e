use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("DARE did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("synthesis failed at leg length {leg_length} m: {source}")]
    ScheduleSynthesis {
        leg_length: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown scenario `{name}` (valid: {valid})")]
    UnknownScenario { name: String, valid: String },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}
