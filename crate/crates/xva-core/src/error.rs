//! Error type shared by all engines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum XvaError {
    #[error("non-finite input in field {field}")]
    NonFinite { field: &'static str },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The closed forms require the rate equalities of the equal-rates model;
    /// asymmetric rates are handled by the backward-equation engine.
    #[error("closed form unavailable: {0}; use the BSDE engine")]
    ClosedFormPrecondition(String),

    /// The first-to-default functionals exclude a measure-zero set of decay
    /// parameters where the printed formula degenerates.
    #[error(
        "excluded parameter point: {0}; perturb lambda or the intensities, or use the BSDE engine"
    )]
    ExcludedParameter(String),

    #[error("picard iteration did not converge: {0}")]
    PicardDiverged(String),

    #[error("requested point outside the solved grid: {0}")]
    OutsideGrid(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, XvaError>;
