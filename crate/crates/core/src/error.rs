use thiserror::Error;

/// Errors produced by the chart library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The exact tail engine would exceed its configured budget.
    #[error("exact computation budget exceeded: {0}")]
    Capacity(String),

    #[error("search did not converge: {0}")]
    NotConverged(String),

    /// One or more reference samples had zero signal probability. These are
    /// never silently averaged into an ARL estimate.
    #[error("infinite conditional ARL for {count} of {k} reference samples")]
    InfiniteConditionalArl { count: usize, k: usize },

    #[error("target {target} is unachievable; maximum attainable value is {max_attainable}")]
    Infeasible { target: f64, max_attainable: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the CLI: 2 invalid input, 3 numeric trouble,
    /// 4 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) => 2,
            Error::Numeric(_)
            | Error::NotConverged(_)
            | Error::InfiniteConditionalArl { .. }
            | Error::Infeasible { .. } => 3,
            Error::Capacity(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
