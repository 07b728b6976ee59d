use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The CLI maps every variant to exit code 2; infeasible designs are not
/// errors and are reported through result flags instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid {context}: {message}")]
    Validation { context: String, message: String },

    #[error("model evaluation failed at pole {pole}: {message}")]
    ModelEvaluation { pole: usize, message: String },

    #[error("grid point {index} ({frequency_hz} Hz): {source}")]
    AtGridPoint {
        index: usize,
        frequency_hz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("sample thickness {0} mm exceeds the 3 mm fixture limit")]
    FixtureLimit(f64),

    #[error("out of range: {0}")]
    Range(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("concentration {0} is not a tabulated column; use interpolate_recipe for intermediate values")]
    NotTabulated(f64),

    #[error("relative error undefined: tissue value is zero at {0} Hz")]
    UndefinedError(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
