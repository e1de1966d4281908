use alloc::string::String;
use core::fmt;

/// A monitored inequality that failed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Name of the check, e.g. `"descent_a"` or `"lyapunov"`.
    pub check: &'static str,
    /// Iteration at which the check failed.
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated at k={}: lhs={:e} > rhs={:e}",
            self.check, self.k, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value from {0}")]
    NonFinite(&'static str),
    #[error("missing capability: {0}")]
    MissingCapability(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(&'static str),
    #[error("inner solver did not converge in {iterations} iterations (residual {residual:e})")]
    InnerSolverFailed { iterations: usize, residual: f64 },
    #[error("armijo linesearch failed: no m <= {max_m} satisfies the sufficient decrease condition")]
    ArmijoFailure { max_m: u32 },
    #[error("solver {solver} is not compatible with problem {problem}: {reason}")]
    Incompatible {
        solver: &'static str,
        problem: String,
        reason: &'static str,
    },
    #[error("inertial parameters rejected: {0}")]
    InertialParams(#[from] crate::inertial::ParamViolation),
    #[error("hypothesis violation: {0}")]
    Violation(Violation),
    #[error("too few points for a fit: {have} < {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("degenerate fitting window: {0}")]
    DegenerateWindow(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<Violation> for DcError {
    fn from(v: Violation) -> Self {
        DcError::Violation(v)
    }
}
