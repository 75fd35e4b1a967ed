use num_complex::Complex64;
use thiserror::Error;

use crate::stress::StressResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow evaluating order {l} at z = {z}; use the scaled variant")]
    Overflow { l: usize, z: Complex64 },

    #[error("order {l} exceeds the configured cap {cap}")]
    OrderCap { l: usize, cap: usize },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("degenerate denominator for l = {l} at omega = {omega}")]
    DegenerateDenominator { l: usize, omega: Complex64 },

    #[error("singular interface system for l = {l} at interface {interface}")]
    SingularSystem { l: usize, interface: usize },

    #[error("partial-wave tail {tail:.3e} exceeds tolerance {tol:.3e} at l_max = {l_max}")]
    TailTooLarge { tail: f64, tol: f64, l_max: usize },

    #[error("quadrature failure: estimated error {estimate:.3e} exceeds tolerance {tol:.3e}")]
    QuadratureFailure { estimate: f64, tol: f64 },

    #[error("root search did not converge: residual {residual:.3e} near {near}")]
    RootNonConvergence { residual: f64, near: Complex64 },

    #[error("stress sum did not converge: {reason}")]
    NonConvergence {
        reason: String,
        partial: Box<StressResult>,
    },
}
