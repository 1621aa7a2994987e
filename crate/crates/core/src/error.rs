use thiserror::Error;

/// Errors raised by geometry kernels, problems, estimators and solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A caller broke a documented precondition (wrong base point, bad config, non-PD operator...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical routine could not produce a trustworthy answer.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The manifold or problem does not implement the requested operation.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A solver failure annotated with the outer iteration where it happened.
    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Strips iteration annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::Numeric(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
