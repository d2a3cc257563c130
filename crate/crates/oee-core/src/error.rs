use thiserror::Error;

/// Failures raised by the numerical core.
///
/// Every variant describes a numerical or physical obstruction; configuration
/// problems are handled one layer up.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OeeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("block decomposition unavailable: {0}")]
    BlockDecompositionUnavailable(String),

    #[error("gap closes at k = ({kx:.6}, {ky:.6}): gap {gap:e}")]
    GapClosure { kx: f64, ky: f64, gap: f64 },

    #[error("spin expectation vanishes at k = ({kx:.6}, {ky:.6}): |S| = {norm:e}")]
    SingularSpin { kx: f64, ky: f64, norm: f64 },

    #[error("degenerate solid-angle triangle at plaquette {plaquette}")]
    SingularTriangle { plaquette: usize },

    #[error("vanishing Berry link at k = ({kx:.6}, {ky:.6})")]
    SingularLink { kx: f64, ky: f64 },

    #[error("hopping range too small: dropped Fourier weight {dropped:e}")]
    RangeTooSmall { dropped: f64 },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("ambiguous level crossings near ky = {ky:.6} after refinement")]
    AmbiguousCrossing { ky: f64 },

    #[error("density matrix is not a projector (deviation {deviation:e})")]
    NotAProjector { deviation: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("malformed data: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, OeeError>;

impl From<std::io::Error> for OeeError {
    fn from(e: std::io::Error) -> Self {
        OeeError::Io(e.to_string())
    }
}

impl From<csv::Error> for OeeError {
    fn from(e: csv::Error) -> Self {
        OeeError::Io(e.to_string())
    }
}
