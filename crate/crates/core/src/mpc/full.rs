use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{FeedbackGain, LinearSystem, Prediction, TerminalIngredients};
use crate::error::{Error, Result};
use crate::geometry::{AdmissibleSetRep, Polytope};
use crate::linalg::min_sym_eigenvalue;
use crate::solvers::{solve_qp, QuadraticProgram, SolveStatus, SolverConfig};

/// `J_N(x, z) = z'Hz + 2 x'Fz + x'C0x` over the admissible set `G_z z <= g0 + E_x x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedProblem {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    pub admissible: AdmissibleSetRep,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution {
    pub z: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

pub fn condense(
    sys: &LinearSystem,
    gain: &FeedbackGain,
    term: &TerminalIngredients,
    state_set: &Polytope,
    input_set: &Polytope,
    horizon: usize,
) -> Result<CondensedProblem> {
    let admissible = AdmissibleSetRep::new(sys, gain, term, state_set, input_set, horizon)?;
    let pred = Prediction::new(sys, gain, horizon);
    let n = sys.n();
    let d = horizon * sys.m();
    let mut h = DMatrix::zeros(d, d);
    let mut f = DMatrix::zeros(n, d);
    let mut c0 = DMatrix::zeros(n, n);
    let mut add = |w: &DMatrix<f64>, px: &DMatrix<f64>, pz: &DMatrix<f64>| {
        let wz = w * pz;
        h += pz.transpose() * &wz;
        f += px.transpose() * &wz;
        c0 += px.transpose() * w * px;
    };
    for k in 0..horizon {
        add(&sys.q, &pred.state_x[k], &pred.state_z[k]);
        add(&sys.r, &pred.input_x[k], &pred.input_z[k]);
    }
    add(&term.pf, &pred.state_x[horizon], &pred.state_z[horizon]);
    let h = (&h + h.transpose()) * 0.5;
    let c0 = (&c0 + c0.transpose()) * 0.5;
    if min_sym_eigenvalue(&h) <= 0.0 {
        return Err(Error::InvalidModel(
            "condensed Hessian is not positive definite".into(),
        ));
    }
    Ok(CondensedProblem {
        h,
        f,
        c0,
        admissible,
        horizon,
    })
}

impl CondensedProblem {
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn d(&self) -> usize {
        self.h.nrows()
    }

    fn check(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() || z.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "expected x in R^{} and z in R^{}",
                self.n(),
                self.d()
            )));
        }
        Ok(())
    }

    pub fn cost(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        self.check(x, z)?;
        Ok(z.dot(&(&self.h * z)) + 2.0 * x.dot(&(&self.f * z)) + x.dot(&(&self.c0 * x)))
    }

    /// The QP in `z` at state `x`; its objective omits the constant `x'C0x`.
    pub fn qp(&self, x: &DVector<f64>) -> Result<QuadraticProgram> {
        let rhs = self.admissible.rhs(x)?;
        QuadraticProgram::new(
            &self.h * 2.0,
            self.f.transpose() * x * 2.0,
            self.admissible.g_z.clone(),
            rhs,
        )
    }
}

/// Optimal input sequence `mu_N(x)` and value `V_N(x)`.
pub fn solve_full(
    cp: &CondensedProblem,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<FullSolution> {
    let qp = cp.qp(x)?;
    let res = solve_qp(&qp, None, cfg)?;
    match res.status {
        SolveStatus::Optimal => {
            let value = cp.cost(x, &res.z)?;
            Ok(FullSolution {
                z: res.z,
                value,
                iterations: res.iterations,
            })
        }
        SolveStatus::Infeasible => Err(Error::Infeasible(
            "state is outside the feasible set".into(),
        )),
        SolveStatus::Unbounded => Err(Error::SolverFailure(
            "condensed QP reported unbounded".into(),
        )),
        SolveStatus::IterationCap => Err(Error::SolverFailure(
            "condensed QP hit its iteration cap".into(),
        )),
    }
}
