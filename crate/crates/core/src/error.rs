use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failure of a direct factorization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("zero or vanishing pivot {pivot:e} at equation {equation}")]
    Singular { equation: usize, pivot: f64 },
    #[error("negative pivot {pivot:e} at equation {equation} in a system expected to be positive definite")]
    Indefinite { equation: usize, pivot: f64 },
    #[error("dimension mismatch: matrix has {expected} rows, vector has {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{what} = {value} is outside its admissible domain")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value assembled in element {element}")]
    NumericalBreakdown { element: usize },
    #[error("linear solver: {0}")]
    Solver(#[from] SolverError),
    #[error(
        "return mapping did not converge after {iterations} iterations \
         (residual {residual:e}, trial von Mises {trial_mises}, eq. plastic strain {eq_plastic_strain}, phi {phi})"
    )]
    LocalSolve {
        iterations: usize,
        residual: f64,
        trial_mises: f64,
        eq_plastic_strain: f64,
        phi: f64,
    },
    #[error("mechanical equilibrium not reached: {0}")]
    Equilibrium(String),
    #[error("state error: {0}")]
    State(String),
    #[error("{count} of {total} nodes have negative concentration; reduce the time step")]
    Stability { count: usize, total: usize },
    #[error("step failed at t = {time} s with dt = {dt} s: {reason}")]
    StepFailure { time: f64, dt: f64, reason: String },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("bracket error: {0}")]
    Bracket(String),
}
