//! Dense LP and convex QP solvers with checkable certificates.
//!
//! Both solvers work on the inequality form `G z <= g`. Every MPC and subspace
//! design subproblem in this crate reduces to one of the two.

mod lp;
mod qp;

pub use lp::solve_lp;
pub use qp::{solve_qp, QuadraticProgram};

use nalgebra::{DMatrix, DVector};

/// Tolerances shared by the LP and QP solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Accepted primal constraint violation.
    pub feas_tol: f64,
    /// Accepted sign violation of reduced costs and multipliers.
    pub opt_tol: f64,
    /// Smallest usable pivot magnitude.
    pub pivot_tol: f64,
    pub lp_max_iter: usize,
    pub qp_max_iter: usize,
    /// `H` is routed to the singular path when `lambda_min <= singular_tol * lambda_max`.
    pub singular_tol: f64,
    /// Regularization used in the final polish of singular problems (minimum-norm tie break).
    pub polish_reg: f64,
    /// Bound on the KKT residual of an `Optimal` result.
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-10,
            pivot_tol: 1e-11,
            lp_max_iter: 20_000,
            qp_max_iter: 20_000,
            singular_tol: 1e-10,
            polish_reg: 1e-10,
            kkt_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub z: DVector<f64>,
    pub value: f64,
    /// One multiplier per inequality row, nonnegative at an optimum.
    pub duals: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Farkas vector `y >= 0, G^T y = 0, g^T y < 0` when `Infeasible`; a
    /// descent ray `G w <= 0, c^T w < 0` when `Unbounded`.
    pub certificate: Option<DVector<f64>>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn failed(
        status: SolveStatus,
        n: usize,
        q: usize,
        iterations: usize,
        certificate: Option<DVector<f64>>,
    ) -> Self {
        Self {
            status,
            z: DVector::zeros(n),
            value: f64::NAN,
            duals: DVector::zeros(q),
            kkt_residual: f64::INFINITY,
            iterations,
            certificate,
        }
    }
}

/// Checks a Farkas certificate of infeasibility for `{z : G z <= g}`.
pub fn verify_farkas(g_mat: &DMatrix<f64>, g: &DVector<f64>, y: &DVector<f64>, tol: f64) -> bool {
    y.len() == g.len()
        && y.iter().all(|&v| v >= -tol)
        && (g_mat.transpose() * y).amax() <= tol
        && g.dot(y) < -tol
}

/// KKT residual of `min 1/2 z'Hz + f'z s.t. Gz <= g` at `(z, y)` in max norm:
/// stationarity, primal and dual feasibility, complementarity.
pub fn kkt_residual(
    h: Option<&DMatrix<f64>>,
    f: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let mut grad = f.clone();
    if let Some(h) = h {
        grad += h * z;
    }
    let stationarity = if g_mat.nrows() > 0 {
        (grad + g_mat.transpose() * y).amax()
    } else {
        grad.amax()
    };
    let slack = g - g_mat * z;
    let mut worst = stationarity;
    for i in 0..g.len() {
        worst = worst.max(-slack[i]).max(-y[i]).max((y[i] * slack[i]).abs());
    }
    worst
}
