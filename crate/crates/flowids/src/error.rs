use thiserror::Error;

/// Crate-wide error type. The CLI maps the variants onto distinct exit codes,
/// so keep the categories coarse: configuration, data, shape, numeric.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(op: &'static str, details: impl Into<String>) -> Self {
        Error::Shape {
            op,
            details: details.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
