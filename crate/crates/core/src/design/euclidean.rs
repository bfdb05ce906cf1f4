use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DesignProblem, GrassmannPoint};
use crate::error::{Error, Result};
use crate::linalg::rank;
use crate::solvers::{solve_qp, QuadraticProgram, SolveStatus, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlternationConfig {
    pub max_iter: usize,
    /// Stop once consecutive projectors are this close.
    pub step_tol: f64,
}

impl Default for AlternationConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            step_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternationOutcome {
    pub point: GrassmannPoint,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Baseline that freezes the coordinates `beta_i = U_k' delta_i` and
/// `alpha_bar_j = U_k' delta_bar_j`, solves the resulting convex QP in
/// `vec(U)` and re-orthonormalizes.
///
/// Fails with `InfeasibleAtIteration(k)`, counting from zero, when the frozen coordinates admit no
/// basis meeting every target set.
pub fn design_subspace_euclidean(
    prob: &DesignProblem,
    alt: &AlternationConfig,
    init: Option<&DMatrix<f64>>,
    cfg: &SolverConfig,
) -> Result<AlternationOutcome> {
    let d = prob.d();
    let r = prob.r;
    let mut point = match init {
        Some(u) => GrassmannPoint::from_span(u)?,
        None => prob.scatter.principal_subspace(r)?,
    };
    let rows = prob.num_constraints();
    for k in 0..alt.max_iter {
        let u = point.basis();
        // sum_i beta_i beta_i' = U'SU and sum_i delta_i beta_i' = SU.
        let c = &prob.scatter.s * u;
        let b = u.transpose() * &c;
        // Column-major vec: U beta = (beta' kron I_d) vec(U).
        let h = b.kronecker(&DMatrix::<f64>::identity(d, d)) * 2.0;
        let f = DVector::from_column_slice(c.as_slice()) * -2.0;
        let mut g_mat = DMatrix::zeros(rows, d * r);
        let mut g = DVector::zeros(rows);
        let mut row = 0;
        for (p, t) in prob.sets.iter().zip(&prob.targets) {
            let alpha = u.transpose() * t;
            let q = p.num_constraints();
            for l in 0..r {
                g_mat
                    .view_mut((row, l * d), (q, d))
                    .copy_from(&(p.matrix() * alpha[l]));
            }
            g.rows_mut(row, q)
                .copy_from(&p.bounds().add_scalar(-prob.margin));
            row += q;
        }
        let qp = QuadraticProgram::new(h, f, g_mat, g)?;
        let warm = DVector::from_column_slice(u.as_slice());
        let res = solve_qp(&qp, Some(&warm), cfg)?;
        match res.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::InfeasibleAtIteration(k)),
            SolveStatus::Unbounded | SolveStatus::IterationCap => {
                return Err(Error::SolverFailure(format!(
                    "alternation QP returned {:?} at iteration {k}",
                    res.status
                )))
            }
        }
        let next = DMatrix::from_column_slice(d, r, res.z.as_slice());
        if rank(&next, 1e-10) < r {
            return Err(Error::NonConvergence(format!(
                "alternation basis lost rank at iteration {k}"
            )));
        }
        let next = GrassmannPoint::from_span(&next)?;
        let step = next.distance(&point);
        point = next;
        if step <= alt.step_tol {
            return Ok(finish(prob, point, k + 1, true));
        }
    }
    Ok(finish(prob, point, alt.max_iter, false))
}

fn finish(
    prob: &DesignProblem,
    point: GrassmannPoint,
    iterations: usize,
    converged: bool,
) -> AlternationOutcome {
    let (max_violation, _) = prob.max_violation(point.projector());
    AlternationOutcome {
        objective: prob.scatter.objective(&point),
        point,
        max_violation,
        iterations,
        converged,
    }
}
