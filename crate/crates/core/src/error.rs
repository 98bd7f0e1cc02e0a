use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh would have {vertices} vertices, above the cap of {cap}")]
    TooLarge { vertices: usize, cap: usize },

    #[error("x = {0} does not coincide with a vertex column of the mesh")]
    OffGrid(f64),

    #[error("matrix is singular at pivot {column} (|pivot| = {magnitude:e})")]
    Singular { column: usize, magnitude: f64 },

    #[error("local problem on subdomain {subdomain} failed: {source}")]
    Subdomain {
        subdomain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dof {0} is not covered by any subdomain")]
    Uncovered(usize),

    #[error("no convergence after {iterations} iterations (last value {last:e})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("input is not discrete-harmonic on subdomain {subdomain}: interior residual {interior:e} vs boundary {boundary:e}")]
    NotHarmonic {
        subdomain: usize,
        interior: f64,
        boundary: f64,
    },

    #[error("partition file: {0}")]
    Partition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
