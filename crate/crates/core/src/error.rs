use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("λ = {0} is a branch point of the quasi-momentum; use the virtual-state chart")]
    BranchPoint(Complex64),

    #[error("sheet tag contradicts the sign of Im λ at λ = {0}")]
    SheetMismatch(Complex64),

    #[error("spectral weight is only defined on the continuous spectrum, got s = {0}")]
    OutsideContinuum(f64),

    #[error("integrator failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contour passes through a zero near λ = {0}")]
    ZeroOnContour(Complex64),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
