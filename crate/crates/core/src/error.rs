use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Dataset does not satisfy the structural contract.
    #[error("invalid data: {0}")]
    Data(String),

    /// A learner or solver could not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data for split plan: {0}")]
    InsufficientData(String),

    #[error("csv error at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 usage, 3 data or
    /// input files, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Csv { .. } | Error::InsufficientData(_) => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) | Error::Json(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
