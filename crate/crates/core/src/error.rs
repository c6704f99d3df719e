use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular to working precision at pivot {index} (|pivot| = {pivot:e})")]
    SingularPivot { index: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations (last estimate {estimate:e}, last change {gap:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        estimate: f64,
        gap: f64,
    },

    #[error("subset probabilities sum to {sum} (must be 1 within {tol:e})")]
    ProbabilitySum { sum: f64, tol: f64 },

    #[error("inclusion probability is zero for part(s) {parts:?}; every part must appear in some supported subset")]
    ZeroInclusion { parts: Vec<usize> },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside the grid domain [0, {t_end})")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("enumeration would visit {count} schedules (limit {limit}); use Monte Carlo sampling instead")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("matrix is not diagonally dominant at row {row}: -a[{row}][{row}] = {diag} <= off-diagonal sum {off_sum}")]
    NotDiagonallyDominant { row: usize, diag: f64, off_sum: f64 },

    #[error("weighting matrix is singular: {0}")]
    SingularWeight(String),

    #[error("decomposition parts do not commute: ||[A_{i}, A_{j}]|| = {norm:e}")]
    NonCommutingParts { i: usize, j: usize, norm: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
