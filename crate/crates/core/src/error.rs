//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: n_interior = {0}, need at least 3 interior nodes")]
    InvalidGrid(usize),

    #[error("grid function holds {got} samples, grid expects {want}")]
    LengthMismatch { got: usize, want: usize },

    #[error("{field} must vanish at the boundary: {detail}")]
    BoundaryCondition { field: &'static str, detail: String },

    #[error("u and v are sampled on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("forcing evaluated to a non-finite value at x = {x}, t = {t}")]
    ForcingEvaluation { x: f64, t: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("integrator failure at t = {t}: {detail}")]
    Integrator { t: f64, detail: String },

    #[error("functional unsupported for this forcing: {0}")]
    UnsupportedFunctional(String),

    #[error("no stability certificate: {0}")]
    NoCertificate(String),

    #[error("certificate incomplete: {0}")]
    CertificateIncomplete(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}
