use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("resource limit exceeded: {what} (estimated {estimate}, budget {budget})")]
    Resource {
        what: String,
        estimate: f64,
        budget: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("interrupted")]
    Interrupted,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
