use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CondensedProblem, MpcSetup};
use crate::control::{rollout, InputSequence};
use crate::error::{Error, Result};
use crate::solvers::{solve_qp, QuadraticProgram, SolveStatus, SolverConfig};

/// Orthonormal basis `U` (d x r) with affine offset `sigma(x) = Gamma x + xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePair {
    pub u: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub xi: DVector<f64>,
}

impl SubspacePair {
    pub fn new(u: DMatrix<f64>, gamma: DMatrix<f64>, xi: DVector<f64>) -> Result<Self> {
        let d = u.nrows();
        if gamma.nrows() != d || xi.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "basis has {d} rows, offset is {}x{} plus {}",
                gamma.nrows(),
                gamma.ncols(),
                xi.len()
            )));
        }
        let gram = u.transpose() * &u - DMatrix::identity(u.ncols(), u.ncols());
        if gram.norm() > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "basis is not orthonormal (|U'U - I| = {:.3e})",
                gram.norm()
            )));
        }
        Ok(Self { u, gamma, xi })
    }

    pub fn d(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    pub fn n(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn offset(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gamma * x + &self.xi
    }

    /// `U alpha + sigma(x)`.
    pub fn point(&self, x: &DVector<f64>, alpha: &DVector<f64>) -> DVector<f64> {
        &self.u * alpha + self.offset(x)
    }
}

/// Plant state together with the admissible guess carried by the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub x: DVector<f64>,
    pub ztilde: DVector<f64>,
}

impl ExtendedState {
    /// Initial mode: `(x, 0)`; `x` must lie in the initial set, which the caller checks.
    pub fn initial(x: DVector<f64>, d: usize) -> Self {
        Self {
            x,
            ztilde: DVector::zeros(d),
        }
    }

    /// Running mode: the guess must be admissible for `x`.
    pub fn running(
        cp: &CondensedProblem,
        x: DVector<f64>,
        ztilde: DVector<f64>,
        tol: f64,
    ) -> Result<Self> {
        if !cp.admissible.contains(&x, &ztilde, tol)? {
            return Err(Error::PreconditionViolated(
                "guess is not admissible for the state".into(),
            ));
        }
        Ok(Self { x, ztilde })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    pub alpha: DVector<f64>,
    pub tau: f64,
    pub z: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Solves the reduced problem over `z = U alpha + tau sigma(x) + (1 - tau) ztilde`.
///
/// With `theta = (alpha, tau)` and `M = [U, sigma(x) - ztilde]` the problem is a
/// QP with Hessian `2 M'HM`, which may be singular. The warm start `theta = 0`
/// reproduces the guess.
pub fn solve_reduced(
    cp: &CondensedProblem,
    pair: &SubspacePair,
    x: &DVector<f64>,
    ztilde: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ReducedSolution> {
    let d = cp.d();
    let r = pair.r();
    if pair.d() != d || pair.n() != cp.n() || x.len() != cp.n() || ztilde.len() != d {
        return Err(Error::DimensionMismatch(
            "reduced problem data do not match the condensed problem".into(),
        ));
    }
    // The origin with a zero guess is an equilibrium of the scheme; keep it exact.
    if x.iter().all(|&v| v == 0.0) && ztilde.iter().all(|&v| v == 0.0) {
        return Ok(ReducedSolution {
            alpha: DVector::zeros(r),
            tau: 0.0,
            z: DVector::zeros(d),
            value: 0.0,
            iterations: 0,
        });
    }
    let mut m = DMatrix::zeros(d, r + 1);
    m.view_mut((0, 0), (d, r)).copy_from(&pair.u);
    m.set_column(r, &(pair.offset(x) - ztilde));
    let hm = &cp.h * &m;
    let hess = m.transpose() * &hm * 2.0;
    let hess = (&hess + hess.transpose()) * 0.5;
    let lin = m.transpose() * (&cp.h * ztilde + cp.f.transpose() * x) * 2.0;
    let g_mat = &cp.admissible.g_z * &m;
    let g = cp.admissible.rhs(x)? - &cp.admissible.g_z * ztilde;
    let qp = QuadraticProgram::new(hess, lin, g_mat, g)?;
    let warm = DVector::zeros(r + 1);
    let res = solve_qp(&qp, Some(&warm), cfg)?;
    match res.status {
        SolveStatus::Optimal => {
            let z = &m * &res.z + ztilde;
            let value = cp.cost(x, &z)?;
            Ok(ReducedSolution {
                alpha: res.z.rows(0, r).into_owned(),
                tau: res.z[r],
                z,
                value,
                iterations: res.iterations,
            })
        }
        SolveStatus::Infeasible => Err(Error::Infeasible(
            "reduced problem has no admissible point; the subspace pair is not initially admissible".into(),
        )),
        SolveStatus::Unbounded => Err(Error::SolverFailure("reduced QP reported unbounded".into())),
        SolveStatus::IterationCap => Err(Error::SolverFailure("reduced QP hit its iteration cap".into())),
    }
}

/// Shifted sequence `(z_1, ..., z_{N-1}, (Kf - K) x_N)`, or zero when the
/// successor state is the origin. The result is checked for admissibility at
/// the successor state.
pub fn admissible_shift(
    setup: &MpcSetup,
    x: &DVector<f64>,
    z: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let adm = &setup.problem.admissible;
    if !adm.contains(x, z, tol)? {
        return Err(Error::PreconditionViolated(format!(
            "sequence is not admissible (violation {:.3e})",
            adm.max_violation(x, z)?
        )));
    }
    let horizon = setup.horizon();
    let m = setup.sys.m();
    let seq = InputSequence::new(z.clone(), horizon)?;
    let traj = rollout(&setup.sys, &setup.gain, x, &seq)?;
    let next = &traj.states[1];
    if next.iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(z.len()));
    }
    let mut shifted = DVector::zeros(z.len());
    shifted
        .rows_mut(0, (horizon - 1) * m)
        .copy_from(&z.rows(m, (horizon - 1) * m));
    let x_end = &traj.states[horizon];
    shifted
        .rows_mut((horizon - 1) * m, m)
        .copy_from(&((&setup.term.kf - &setup.gain.k) * x_end));
    let violation = adm.max_violation(next, &shifted)?;
    if violation > tol {
        return Err(Error::InvalidModel(format!(
            "shifted sequence is not admissible (violation {violation:.3e}); terminal ingredients are inconsistent"
        )));
    }
    Ok(shifted)
}
