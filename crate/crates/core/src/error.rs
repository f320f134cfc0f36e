use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected N = {expected}, got N = {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("A is not Schur stable (spectral radius {radius:.12})")]
    NotSchurStable { radius: f64 },

    #[error("B is rank deficient (sigma_min / sigma_max = {ratio:.3e})")]
    RankDeficientB { ratio: f64 },

    #[error("(A, B) is not reachable (reachability rank {rank} < {n})")]
    Unreachable { rank: usize, n: usize },

    #[error("Lyapunov operator is not stable (spectral radius {radius:.12})")]
    UnstableMatrix { radius: f64 },

    #[error("numerical im Γ has dimension {found}, expected m(2n-m) = {expected}")]
    MomentDimension { found: usize, expected: usize },

    #[error("parameter is outside L+ (grid margin {margin:.3e})")]
    NotInLPlus { margin: f64 },

    #[error("factor is outside C+: {0}")]
    NotInCPlus(String),

    #[error("no stabilizing DARE solution: {0}")]
    NoStabilizingSolution(String),

    #[error("QZ iteration did not converge")]
    QzNoConvergence,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("infeasible covariance: {0}")]
    InfeasibleSigma(String),

    #[error("line search collapsed at iteration {}: residual history {history:?}", history.len())]
    LineSearchCollapse { history: Vec<f64> },

    #[error("maximum iterations exceeded: residual history {history:?}")]
    MaxItersExceeded { history: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Residual history carried by solver failures, if any.
    pub fn residual_history(&self) -> Option<&[f64]> {
        match self {
            Error::LineSearchCollapse { history } | Error::MaxItersExceeded { history } => Some(history),
            _ => None,
        }
    }
}
