use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent grids, tables or scenario settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// The actuator bank cannot independently move the required modes.
    #[error("stabilizability error: {0}")]
    Stabilizability(String),

    /// Linear solver breakdown or a non-finite state.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Not enough usable samples for an exponential fit.
    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
