use thiserror::Error;

/// Errors produced by grid operators and field arithmetic.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("shape mismatch: expected extent {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,
    #[error("prolongation target is not a doubled grid (axis {axis})")]
    NotDoubled { axis: usize },
    #[error("operation requires a {expected}-dimensional grid, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Errors from the direct and iterative linear solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("singular matrix: zero pivot at index {pivot}")]
    Singular { pivot: usize },
    #[error("iterative solve failed: relative residual {residual:.3e} after {iters} iterations")]
    IterativeFailure { residual: f64, iters: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Errors raised while evaluating problem data (costs, Hamiltonians).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem '{name}'; valid names: {valid}")]
    UnknownName { name: String, valid: String },
    #[error("degenerate cost: nonpositive variance {variance:.3e} in moment evaluation")]
    DegenerateCost { variance: f64 },
    #[error("invalid problem data: {message}")]
    Invalid { message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Errors from the HJB/FP sweeps and the fictitious-play driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Newton did not converge at time index {time_index}: residual {residual:.3e} after {iters} iterations")]
    NewtonFailure {
        time_index: usize,
        residual: f64,
        iters: usize,
    },
    #[error("linear solve failed at time index {time_index}")]
    StepSolve {
        time_index: usize,
        #[source]
        source: SolveError,
    },
    #[error("solver error at outer iteration {iteration}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<SolverError>,
    },
    #[error("weight {delta} outside (0, 1]")]
    WeightRange { delta: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
