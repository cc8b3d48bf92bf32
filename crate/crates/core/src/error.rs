use thiserror::Error;

use crate::scale::SeriesKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scale index {0} is outside the open interval (0, 1)")]
    ScaleOutOfRange(f64),
    #[error("series kinds differ: {left:?} vs {right:?}")]
    KindMismatch { left: SeriesKind, right: SeriesKind },
    #[error("truncation orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("operation requires a Taylor series, got {0:?}")]
    NotTaylor(SeriesKind),
    #[error("series must vanish at the origin (constant coefficient {0})")]
    NonZeroConstant(f64),
    #[error("germ is not invertible: linear coefficient modulus {modulus:e} below {threshold:e}")]
    NotInvertible { modulus: f64, threshold: f64 },
    #[error("reciprocal undefined: constant coefficient vanishes")]
    ZeroLeadingCoefficient,
    #[error("chart domain violated: |xi|_s = {norm} is not below 2")]
    ChartDomain { norm: f64 },
    #[error("domain guard: norm {norm:e} exceeds radius {radius:e}")]
    DomainGuard { norm: f64, radius: f64 },
    #[error("operator failed the linearity check (relative defect {defect:e})")]
    NotLinear { defect: f64 },
    #[error("scale grid is empty or has a point with s + sigma >= 1")]
    InvalidGrid,
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("input has a nonzero mean coefficient ({0:e})")]
    NonZeroMean(f64),
    #[error("small divisor at mode {mode} underflows ({modulus:e})")]
    DivisorUnderflow { mode: isize, modulus: f64 },
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
    #[error("need at least {needed} eligible steps, found {found}")]
    InsufficientSteps { needed: usize, found: usize },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
