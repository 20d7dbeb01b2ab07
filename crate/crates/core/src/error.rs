use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its documented range.
    InvalidParameter { name: &'static str, reason: String },
    /// Field shapes or dimensions do not match the grid.
    Shape(String),
    /// Adaptive step control could not meet the requested tolerance.
    Integration { t: f64, reason: &'static str },
    /// Successive quadrature refinements kept disagreeing.
    Quadrature { value: f64, estimate: f64, reason: &'static str },
    /// Density would be nonpositive at some grid point.
    NonPositiveDensity { index: usize, value: f64 },
    /// Requested time step exceeds the Courant limit.
    Cfl { dt: f64, limit: f64 },
    /// A quantity became NaN or infinite.
    NonFinite { what: &'static str, t: f64 },
    /// The exponential weight overflows on the active support.
    DomainSizing { t: f64, max_exponent: f64 },
    /// Fit or series input is unusable.
    Fit(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid parameter `{name}`: {reason}"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Integration { t, reason } => write!(f, "ODE integration failed at t = {t}: {reason}"),
            Error::Quadrature { value, estimate, reason } => {
                write!(f, "quadrature did not converge ({reason}): last {value}, previous {estimate}")
            }
            Error::NonPositiveDensity { index, value } => {
                write!(f, "density would be nonpositive at grid index {index} (sound-speed factor {value})")
            }
            Error::Cfl { dt, limit } => write!(f, "time step {dt} exceeds the CFL limit {limit}"),
            Error::NonFinite { what, t } => write!(f, "non-finite {what} at t = {t}"),
            Error::DomainSizing { t, max_exponent } => write!(
                f,
                "weight exponent 2ψ reaches {max_exponent:.1} on the active support at t = {t}; enlarge the domain budget or shrink the support"
            ),
            Error::Fit(msg) => write!(f, "fit rejected: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
