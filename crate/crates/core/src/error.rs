use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model data: {0}")]
    InvalidModel(String),

    #[error(
        "no stabilizing Riccati solution after {iterations} iterations (residual {residual:.3e})"
    )]
    NoStabilizingSolution { iterations: usize, residual: f64 },

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("polytope is unbounded along coordinate {0}")]
    Unbounded(usize),

    #[error("iteration cap {0} exceeded")]
    IterationCapExceeded(usize),

    #[error("the origin has no admissible input sequence; terminal ingredients are broken")]
    OriginInfeasible,

    #[error("optimization problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("closed loop left the state constraint set at step {step}")]
    DivergenceDetected { step: usize },

    #[error("closed loop did not converge (final |x| = {final_norm:.3e})")]
    NotConverged { final_norm: f64 },

    #[error("rejection sampling stalled: {accepted} accepted out of {draws} draws")]
    RejectionStall { accepted: usize, draws: usize },

    #[error(
        "subspace design infeasible: worst violation {violation:.3e} at target {worst_target}"
    )]
    InfeasibleDesign { violation: f64, worst_target: usize },

    #[error("Euclidean alternation infeasible at iteration {0}")]
    InfeasibleAtIteration(usize),

    #[error("no convergence: {0}")]
    NonConvergence(String),
}
