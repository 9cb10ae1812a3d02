use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular basis (|det| = {det:e})")]
    SingularBasis { det: f64 },

    #[error("basis is not square or is empty: {rows} rows, {cols} columns")]
    BadShape { rows: usize, cols: usize },

    #[error("unknown lattice `{0}`")]
    UnknownLattice(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "enumeration budget exceeded: ~{estimated:.3e} vectors estimated, budget {budget:.3e}"
    )]
    BudgetExceeded { estimated: f64, budget: f64 },

    #[error("insufficient shells: need max_norm >= {required_max_norm}")]
    InsufficientShells { required_max_norm: f64 },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("parameters out of range: {0}")]
    OutOfRange(String),

    #[error("incomplete gamma domain error: a = {a}, x = {x}")]
    GammaDomain { a: f64, x: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("series did not converge: {0}")]
    Nonconvergence(String),

    #[error("point lies on the lattice (distance {0:e})")]
    OnLattice(f64),

    #[error("pole of the Epstein zeta function at s = d = {0}")]
    Pole(usize),

    #[error("logarithmic kernel is not supported by this route")]
    LogUnsupported,

    #[error("points {i} and {j} coincide on the torus (distance {distance:e})")]
    CoincidentPoints { i: usize, j: usize, distance: f64 },

    #[error("line search failed after {iterations} iterations (energy {energy})")]
    LineSearch { iterations: usize, energy: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Budget overruns are reported separately from other numerical failures.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
