use thiserror::Error;

#[derive(Debug, Error)]
pub enum PnnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("computation failed: {0}")]
    Computation(String),

    #[error("singular system")]
    Singular,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PnnError>;
