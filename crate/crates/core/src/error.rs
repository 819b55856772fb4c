use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A field did not have the number of entries the grid requires.
    SizeMismatch {
        expected: usize,
        found: usize,
    },
    AxisOutOfRange {
        axis: usize,
        n_sites: usize,
    },
    InvalidGrid(&'static str),
    InvalidParameter(&'static str),
    /// A routine that needs a normalized state got something else.
    NotNormalized {
        norm2: f64,
    },
    /// Dense construction refused because `M` exceeds the cap.
    DenseCapExceeded {
        size: usize,
        cap: usize,
    },
    PoissonNotConverged {
        iterations: usize,
        residual: f64,
    },
    EigenNotConverged {
        residual: f64,
    },
    /// The prefactor `1 + S + log p` was not positive everywhere.
    IndefinitePrefactor {
        fraction: f64,
    },
    ScfNotConverged {
        iterations: usize,
        history: Vec<f64>,
    },
    NonFinite {
        time: f64,
    },
    OverlappingStates {
        overlap: f64,
    },
    GridMismatch,
    BracketFailure,
    InsufficientRecords {
        needed: usize,
        found: usize,
    },
    UnsupportedSites {
        needed: &'static str,
        found: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SizeMismatch { expected, found } => {
                write!(f, "field has {found} entries, grid needs {expected}")
            }
            Error::AxisOutOfRange { axis, n_sites } => {
                write!(f, "axis {axis} out of range for {n_sites} lattice sites")
            }
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NotNormalized { norm2 } => {
                write!(f, "state is not normalized (norm^2 = {norm2:e})")
            }
            Error::DenseCapExceeded { size, cap } => {
                write!(f, "dense matrix of size {size} exceeds the cap of {cap}")
            }
            Error::PoissonNotConverged { iterations, residual } => write!(
                f,
                "poisson solver stopped after {iterations} iterations at relative residual {residual:e}"
            ),
            Error::EigenNotConverged { residual } => {
                write!(f, "eigensolver did not converge (residual {residual:e})")
            }
            Error::IndefinitePrefactor { fraction } => {
                write!(f, "prefactor is not positive on {:.3}% of the grid", 100.0 * fraction)
            }
            Error::ScfNotConverged { iterations, history } => write!(
                f,
                "self-consistent iteration did not converge in {iterations} iterations (last |dω| = {:e})",
                history.last().copied().unwrap_or(f64::NAN)
            ),
            Error::NonFinite { time } => write!(f, "non-finite value encountered at t = {time}"),
            Error::OverlappingStates { overlap } => {
                write!(f, "states overlap: max |psi1 psi2| = {overlap:e}")
            }
            Error::GridMismatch => f.write_str("states live on different grids"),
            Error::BracketFailure => f.write_str("bracket does not enclose a minimum"),
            Error::InsufficientRecords { needed, found } => {
                write!(f, "need at least {needed} records, got {found}")
            }
            Error::UnsupportedSites { needed, found } => {
                write!(f, "operation needs {needed} lattice sites, grid has {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
