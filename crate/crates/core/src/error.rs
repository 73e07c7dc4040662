// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors produced by the estimator and its supporting machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The data cannot support a finite test statistic (e.g. zero long-run variance).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// AR polynomial has a root on or inside the unit circle.
    #[error("AR part is not stationary (coefficients {0:?})")]
    NonStationary(Vec<f64>),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
