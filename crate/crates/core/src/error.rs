use alloc::string::String;
use core::fmt;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A kernel or dataset dimension of zero (or otherwise unusable).
    InvalidDimension(usize),
    /// Two objects that must agree in size do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { name: &'static str, reason: String },
    /// A NaN or infinite value where finite input is required.
    NonFinite(&'static str),
    /// The kernel returned a negative value where its square root is needed.
    NegativeKernel { row: usize, value: f64 },
    /// The kernel window around the query point contains no design point.
    EmptyWindow,
    /// Operation called with a kernel built for the other stage.
    WrongStage {
        expected: crate::kernels::Stage,
        found: crate::kernels::Stage,
    },
    /// Numerical validation is only implemented up to a fixed dimension.
    ValidationUnavailable { dim: usize, max_dim: usize },
    /// Quadrature did not settle within the evaluation budget.
    QuadratureBudget { achieved: f64, requested: f64 },
    /// Brute-force enumeration is limited to small problems.
    TooManyCoordinates { p: usize, max: usize },
    /// No sign pattern passed the stationarity checks.
    NoFeasiblePattern,
    /// Arithmetic overflowed to a non-finite value.
    Overflow(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(d) => write!(f, "invalid dimension {d}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected length {expected}, found {found}"),
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NegativeKernel { row, value } => {
                write!(f, "kernel is negative ({value}) at row {row}")
            }
            Error::EmptyWindow => {
                write!(f, "no design point falls inside the kernel window")
            }
            Error::WrongStage { expected, found } => {
                write!(f, "expected a {expected} kernel, got a {found} kernel")
            }
            Error::ValidationUnavailable { dim, max_dim } => write!(
                f,
                "validation unavailable in dimension {dim} (maximum {max_dim})"
            ),
            Error::QuadratureBudget {
                achieved,
                requested,
            } => write!(
                f,
                "quadrature did not converge: change {achieved:e} exceeds tolerance {requested:e}"
            ),
            Error::TooManyCoordinates { p, max } => {
                write!(f, "{p} coordinates exceeds the enumeration limit of {max}")
            }
            Error::NoFeasiblePattern => {
                write!(f, "no sign pattern satisfies the optimality conditions")
            }
            Error::Overflow(what) => write!(f, "arithmetic overflow in {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
