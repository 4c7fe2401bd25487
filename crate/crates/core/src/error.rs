use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed geometry, lens, or scenario parameters.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// Request exceeds what the implementation supports (e.g. ν > 3).
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// The propagator could not bound the spectrum of the operator.
    #[error("spectral bound estimation failed: {0}")]
    SpectralBound(String),
    #[error("divergent series: {0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidSpec(msg.into()))
}
