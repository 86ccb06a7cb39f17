use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point or coordinate outside the admissible interval.
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// The operator data violates a structural invariant (Hermitian α,
    /// commutativity, integrability).
    #[error("model error: {0}")]
    Model(String),

    /// A matrix that must be inverted is singular or too ill-conditioned.
    #[error("singular matrix at t = {t}, z = {z}: {context}")]
    Singular { t: f64, z: Complex64, context: String },

    /// Step-size control failed to reach the requested tolerance.
    #[error("accuracy failure at {position}: {context}")]
    Accuracy { position: f64, context: String },

    /// The requested closed form needs assumptions the spec does not satisfy.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
