use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian PSD (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("rank {rank} too high for the recursive pencil path (requires rank < {limit})")]
    RankTooHigh { rank: usize, limit: usize },

    #[error("matrix pencil along dimension {dim} is degenerate: {reason}")]
    PencilDegenerate { dim: usize, reason: String },

    #[error("ill-posed subproblem: {0}")]
    IllPosed(String),

    #[error("search over candidate frequency tuples failed: {0}")]
    SearchFailed(String),

    #[error("unsupported observation model: {0}")]
    UnsupportedObservation(String),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
