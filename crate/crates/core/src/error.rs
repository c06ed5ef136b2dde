use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised anywhere in the library.
///
/// Variants split into two families: model preconditions (the parameters or
/// the requested quantity do not admit an answer) and numerical failures
/// (a solver did not deliver one). [`Error::is_precondition`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("ordering condition violated: need B > A > C or B < A < C (A={a}, B={b}, C={c})")]
    OrderingViolated { a: f64, b: f64, c: f64 },
    #[error("no real roots: lambda={lambda} exceeds (a2+c2)^2/(4 b2 c2) = {max}")]
    NoRealRoots { lambda: f64, max: f64 },
    #[error("bifurcation values not positive: need vbar < (a2-c2)/(2 c2) and a2 > c2")]
    NotPositive,
    #[error("closed-form quantity requires b1 = 0 (got b1 = {0})")]
    RequiresB1Zero(f64),
    #[error("degenerate stability: t = {t} sits on a root of F (F(t) = {f_t})")]
    Degenerate { t: f64, f_t: f64 },
    #[error("layer hypothesis failed: need a2 - c2 > 2 a1 c2 / c1")]
    HypothesisFailed,
    #[error("layer position x0 = {x0} outside admissible interval ({x1}, {x2})")]
    X0OutOfRange { x0: f64, x1: f64, x2: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular jacobian")]
    SingularJacobian,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("iterate left the admissible domain (1 + v must stay above 0.5)")]
    LeftDomain,
    #[error("relaxation blew up: |v| = {0}")]
    Blowup(f64),
    #[error("eigenvalue iteration failed to converge")]
    ConvergenceFailure,
    #[error("stability indeterminate: leading real part {0:e} within margin of zero")]
    Indeterminate(f64),
    #[error("branch seed failed: {0}")]
    SeedFailure(String),
    #[error("insufficient data: need {needed} points, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("unbalanced: equal-area gap {gap:e} exceeds tolerance {tol:e}")]
    Unbalanced { gap: f64, tol: f64 },
    #[error("negative energy radicand at V = {0}")]
    NegativeEnergy(f64),
    #[error("no equal-area point inside the lambda window")]
    NoMaxwellPoint,
    #[error("layer seed rejected: {0}")]
    SeedRejected(String),
}

impl Error {
    /// True for errors caused by the problem instance rather than by a solver.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::OrderingViolated { .. }
                | Error::NoRealRoots { .. }
                | Error::NotPositive
                | Error::RequiresB1Zero(_)
                | Error::Degenerate { .. }
                | Error::HypothesisFailed
                | Error::X0OutOfRange { .. }
                | Error::NoMaxwellPoint
                | Error::Unbalanced { .. }
        )
    }
}
