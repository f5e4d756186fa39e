use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("argument {value} outside the tabulated range [0, {max}]")]
    OutOfTableRange { value: f64, max: f64 },

    #[error("invalid revolution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid function does not live on the operator's grid")]
    GridMismatch,

    #[error("function is not in the monotone cone (min value {min_value:e}, worst slope {worst_slope:e})")]
    NotInCone { min_value: f64, worst_slope: f64 },

    #[error("cone projection did not converge after {cycles} cycles (gap {gap:e})")]
    ProjectionDidNotConverge { cycles: usize, gap: f64 },

    #[error("conjugate gradients stopped after {iterations} iterations with relative residual {residual:e}")]
    LinearSolveDidNotConverge { iterations: usize, residual: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("degenerate iteration: {0}")]
    DegenerateIteration(String),

    #[error("mountain-pass setup failed: {0}")]
    MountainPassSetup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
