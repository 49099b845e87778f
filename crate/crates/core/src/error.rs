use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Lengths or dimensions of inputs do not agree.
    #[error("shape error: {0}")]
    Shape(String),
    /// The innovation variance (or another filter variance) is non-positive.
    #[error("degenerate system at step {step}: {reason}")]
    DegenerateSystem { step: usize, reason: String },
    /// Every particle weight vanished.
    #[error("particle weights degenerate at step {step}")]
    WeightDegeneracy { step: usize },
    /// The objective is not finite at the initial point.
    #[error("initialisation error: {0}")]
    Init(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
