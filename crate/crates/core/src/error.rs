//! Error type shared by the whole kernel.

use core::fmt;

/// Everything that can go wrong inside the kernel.
///
/// Variants carry the numbers a caller needs to print a useful message or
/// to recover (e.g. the admissible step size after a CFL rejection).
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid construction rejected (size, power-of-two, length).
    InvalidGrid(&'static str),
    /// Two fields with different grids were combined.
    GridMismatch,
    /// A field contains NaN or infinity.
    NonFinite(&'static str),
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { what: &'static str, value: f64 },
    /// A coefficient relation is violated; the message names the relation.
    CoefficientRelation(&'static str),
    /// The density dropped to (or below) the vacuum floor.
    Vacuum { min_rho: f64, floor: f64 },
    /// Advective/wave CFL number exceeded the configured limit.
    CflViolation {
        observed: f64,
        limit: f64,
        /// Largest step size that would have been accepted.
        max_dt: f64,
    },
    /// Per-step fixed-point iteration ran out of iterations.
    PicardDiverged { iters: usize, last_residual: f64 },
    /// An operation needs more samples than it was given.
    TooFewSamples { needed: usize, got: usize },
    /// Initial density lies outside the declared bounds.
    InitialBoundViolated { min_rho: f64, max_rho: f64, lo: f64, hi: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch => write!(f, "fields live on different grids"),
            Error::NonFinite(what) => write!(f, "non-finite values in {what}"),
            Error::InvalidParameter { what, value } => {
                write!(f, "invalid parameter {what} = {value}")
            }
            Error::CoefficientRelation(rel) => {
                write!(f, "coefficient relation violated: {rel}")
            }
            Error::Vacuum { min_rho, floor } => {
                write!(f, "vacuum state: min density {min_rho} at or below floor {floor}")
            }
            Error::CflViolation { observed, limit, max_dt } => write!(
                f,
                "CFL number {observed} exceeds limit {limit}; largest admissible dt is {max_dt}"
            ),
            Error::PicardDiverged { iters, last_residual } => write!(
                f,
                "fixed-point iteration did not converge after {iters} iterations \
                 (last residual {last_residual})"
            ),
            Error::TooFewSamples { needed, got } => {
                write!(f, "needs at least {needed} samples, got {got}")
            }
            Error::InitialBoundViolated { min_rho, max_rho, lo, hi } => write!(
                f,
                "initial density range [{min_rho}, {max_rho}] violates declared bounds [{lo}, {hi}]"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
