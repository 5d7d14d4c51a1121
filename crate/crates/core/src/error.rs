use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("vertex ({0}, {1}) is not on the lattice")]
    UnknownVertex(i64, i64),

    #[error("link ({n1}, {n2}, k={direction}) is not on the lattice")]
    UnknownLink { n1: i64, n2: i64, direction: u8 },

    #[error("basis of {states} states exceeds the budget of {budget} states")]
    BasisBudget { states: u128, budget: u128 },

    #[error("state encoding needs {bits} bits, more than the 64 available")]
    EncodingTooWide { bits: u32 },

    #[error("operator acts on basis `{found}`, expected `{expected}`")]
    BasisMismatch { expected: String, found: String },

    #[error("unsupported frame pair {from} -> {to}: {reason}")]
    UnsupportedFramePair {
        from: String,
        to: String,
        reason: String,
    },

    #[error("dimension {dim} exceeds the dense cutoff {cutoff}; use the krylov method")]
    DenseCutoff { dim: usize, cutoff: usize },

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("state violates Gauss's law at vertices {vertices:?}")]
    GaussViolation { vertices: Vec<(usize, usize)> },

    #[error("invalid preparation plan: {0}")]
    InvalidPlan(String),

    #[error("singular fit, linearly dependent terms: {0:?}")]
    SingularFit(Vec<String>),

    #[error("fringe fit failed: {0}")]
    FitFailure(String),

    #[error("leakage {leakage:.3e} out of the two-level subspace exceeds bound {bound:.3e} at T={time}")]
    LeakageExceeded { leakage: f64, bound: f64, time: f64 },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("perturbation split: {0}")]
    InvalidSplit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) | Error::FitFailure(_) | Error::LeakageExceeded { .. } => 2,
            _ => 1,
        }
    }
}
