use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an argument outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// A covariance factorization or other numerical step failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The black-box evaluator failed for a design.
    #[error("evaluation failed at {point:?}: {message}")]
    Evaluation { point: Vec<f64>, message: String },

    /// An experiment configuration is malformed or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn evaluation(point: &[f64], msg: impl Into<String>) -> Self {
        Error::Evaluation {
            point: point.to_vec(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
