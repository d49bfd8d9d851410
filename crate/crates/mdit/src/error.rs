use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("corrupt input: {0}")]
    CorruptInput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("internal consistency: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::Io(_)
            | Error::EmptyDataset(_)
            | Error::CorruptInput(_)
            | Error::DegenerateInput(_)
            | Error::Internal(_) => 3,
            Error::Divergence(_) => 4,
        }
    }
}
