use thiserror::Error;

use crate::bounds::BoundsReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation failure: {0}")]
    Evaluation(String),

    #[error("regularization failure: {0}")]
    Regularization(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The bound system has no solution for the given inputs. `report` holds
    /// every constant that could be computed before or despite the failure.
    #[error("infeasible bounds: binding constraint `{constraint}`")]
    Infeasible { constraint: String, report: Option<Box<BoundsReport>> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
