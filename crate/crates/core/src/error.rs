use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("conic solve did not reach an optimal point (status {0:?})")]
    NotConverged(SolveStatus),

    #[error("instance infeasible: no design meets the SINR and fronthaul constraints")]
    InstanceInfeasible,

    #[error(
        "line search failed at outer iteration {iteration} after {backtracks} backtracks \
         (stale or inexact gradient suspected)"
    )]
    LineSearchFailed { iteration: usize, backtracks: usize },

    #[error("degenerate user {0}: covariance has no positive eigenvalue")]
    DegenerateUser(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
