use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A non-finite value showed up in a weight, feature or intermediate.
    #[error("numeric fault{}: {context}", index.map(|i| format!(" at coordinate {i}")).unwrap_or_default())]
    NumericFault { context: String, index: Option<usize> },

    #[error("invalid label {label} for {loss} loss (expected -1 or +1)")]
    InvalidLabel { label: f64, loss: &'static str },

    #[error("invalid example: {0}")]
    InvalidExample(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("example {index}: {source}")]
    AtExample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numeric(context: impl Into<String>, index: Option<usize>) -> Self {
        Error::NumericFault {
            context: context.into(),
            index,
        }
    }

    /// True when the error (or the error it wraps) is a numeric fault.
    pub fn is_numeric_fault(&self) -> bool {
        match self {
            Error::NumericFault { .. } => true,
            Error::AtExample { source, .. } => source.is_numeric_fault(),
            _ => false,
        }
    }

    /// True for errors caused by the input data rather than the arithmetic.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InvalidLabel { .. } | Error::InvalidExample(_) | Error::Parse { .. } | Error::Io(_) => true,
            Error::AtExample { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}
