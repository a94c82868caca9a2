use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is numerically singular: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("refinement level {level} exceeds maximum depth {max}")]
    DepthExceeded { level: u8, max: u8 },
    #[error("grid is not 2:1 balanced")]
    Unbalanced,
    #[error("cannot coarsen: {0}")]
    Coarsen(String),
    #[error("grids are not nested: {0}")]
    NotNested(String),
    #[error("hanging node at lattice ({0}, {1}) cannot be resolved")]
    UnresolvedHanging(u32, u32),
    #[error("no stabilization value for Dirichlet-cut cell {0}")]
    MissingStabilization(usize),
    #[error("empty scope: {0}")]
    EmptyScope(String),
    #[error("mass matrix has no physical support")]
    ZeroMass,
    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
