use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    /// A map produced a coordinate that is NaN or infinite.
    NonFinite { coordinate: usize },
    /// Failure while producing step `step` of a trajectory.
    Step { step: usize, source: Box<Error> },
    Singular { condition: f64 },
    /// Inverse iteration exceeded the modulus guard.
    OverflowGuard { step: usize, log10_magnitude: f64 },
    Empty(&'static str),
    ZeroEigenvalue { index: usize },
    UnstableCycle { rho_star: f64 },
    AmbiguousCircles { moduli: Vec<f64> },
    ZeroLambda,
    /// The weighted term `lambda^-k * sample_k` left the double range.
    WeightOverflow { step: usize },
    TargetNotInLattice(String),
    NonUniformGrid { index: usize },
    /// Running continuous averages grew past the divergence threshold.
    TargetBelowGrowth { time: f64 },
    IndexOutOfRange { index: usize, len: usize },
    DomainViolation { coordinate: usize, value: f64 },
    OutsidePolydisc { coordinate: usize },
    KindMismatch(&'static str),
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite { coordinate } => {
                write!(f, "non-finite value in coordinate {coordinate}")
            }
            Error::Step { step, source } => write!(f, "step {step}: {source}"),
            Error::Singular { condition } => {
                write!(f, "matrix is singular or ill-conditioned (condition {condition:e})")
            }
            Error::OverflowGuard {
                step,
                log10_magnitude,
            } => write!(
                f,
                "overflow guard triggered at step {step} (modulus 1e{log10_magnitude:.2})"
            ),
            Error::Empty(what) => write!(f, "empty input: {what}"),
            Error::ZeroEigenvalue { index } => write!(f, "eigenvalue {index} is zero"),
            Error::UnstableCycle { rho_star } => {
                write!(f, "rho_star must be negative, got {rho_star}")
            }
            Error::AmbiguousCircles { moduli } => {
                write!(f, "ambiguous circle grouping, colliding moduli {moduli:?}")
            }
            Error::ZeroLambda => f.write_str("lambda must be nonzero"),
            Error::WeightOverflow { step } => {
                write!(f, "weighted sample overflow at step {step}")
            }
            Error::TargetNotInLattice(t) => write!(f, "target {t} is not in the lattice"),
            Error::NonUniformGrid { index } => {
                write!(f, "time grid is not uniform at sample {index}")
            }
            Error::TargetBelowGrowth { time } => write!(
                f,
                "target modulus below sample growth (divergence detected at t = {time})"
            ),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::DomainViolation { coordinate, value } => {
                write!(f, "coordinate {coordinate} = {value} leaves the declared domain")
            }
            Error::OutsidePolydisc { coordinate } => write!(
                f,
                "coordinate {coordinate} is outside the open unit polydisc"
            ),
            Error::KindMismatch(what) => write!(f, "kind mismatch: {what}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
