use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid point count must be even and at least 64.
    InvalidPointCount(usize),
    /// Momentum half-extent must be positive and finite.
    InvalidExtent(f64),
    /// A shape parameter (width, rate, step, tolerance) was outside its domain.
    InvalidParameter { name: &'static str, value: f64 },
    /// Two objects built on different grids were combined.
    GridMismatch,
    /// Amplitude length does not match the grid.
    LengthMismatch { expected: usize, found: usize },
    /// Normalizing a pulse whose norm vanishes.
    ZeroNorm,
    /// Input pulse was required to be normalized.
    NotNormalized { norm_sq: f64 },
    /// Two-photon amplitude is not bosonically symmetric.
    Asymmetric { max_defect: f64 },
    /// Emitter parameters violate gamma > 0, 0 < beta <= 1, gamma_p >= 0.
    InvalidEmitter(&'static str),
    /// An emitter chain must hold at least one emitter.
    EmptyChain,
    /// A computed quantity was NaN or infinite.
    NonFinite(&'static str),
    /// NS-gate pipeline and closed form disagree.
    ClosedFormMismatch { deviation: f64, tolerance: f64 },
    /// Density-matrix trace drifted during integration.
    TraceDrift { drift: f64 },
    /// Fidelity outside [0, 1].
    FidelityOutOfRange(f64),
    /// The oracle supports a limited photon number / emitter count.
    Unsupported(&'static str),
    /// A density matrix lost Hermiticity or positivity.
    InvalidDensityMatrix { what: &'static str, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPointCount(n) => {
                write!(f, "grid point count {n} must be even and >= 64")
            }
            Error::InvalidExtent(k) => write!(f, "momentum extent {k} must be positive"),
            Error::InvalidParameter { name, value } => {
                write!(f, "parameter `{name}` has invalid value {value}")
            }
            Error::GridMismatch => f.write_str("operands live on different grids"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} amplitudes, found {found}")
            }
            Error::ZeroNorm => f.write_str("cannot normalize a zero-norm pulse"),
            Error::NotNormalized { norm_sq } => {
                write!(f, "pulse must be normalized (norm^2 = {norm_sq})")
            }
            Error::Asymmetric { max_defect } => {
                write!(f, "two-photon amplitude is not symmetric (max defect {max_defect:e})")
            }
            Error::InvalidEmitter(why) => write!(f, "invalid emitter: {why}"),
            Error::EmptyChain => f.write_str("emitter chain is empty"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::ClosedFormMismatch { deviation, tolerance } => write!(
                f,
                "NS-gate pipeline deviates from closed form by {deviation:e} (> {tolerance:e})"
            ),
            Error::TraceDrift { drift } => {
                write!(f, "density-matrix trace drifted by {drift:e}; reduce dt")
            }
            Error::FidelityOutOfRange(v) => write!(f, "fidelity {v} outside [0, 1]"),
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::InvalidDensityMatrix { what, value } => {
                write!(f, "density matrix violates {what} ({value:e})")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
