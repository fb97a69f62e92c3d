//! Desk-scale numerical laboratory for Schatten-class estimates: extension
//! operators, orthonormal Strichartz bounds, sandwiched resolvents,
//! Birman–Schwinger determinants, Hartree dynamics and scattering matrices.

pub mod eigenbounds;
pub mod evolution;
pub mod hartree;
pub mod lab;
pub mod resolvent;
pub mod restriction;
pub mod scatter;
pub mod special;
pub mod specmat;
pub mod surface;

pub use faer::Mat;
pub use num_complex::Complex64 as C64;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("numerically singular: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Invalid(msg.into()))
}
