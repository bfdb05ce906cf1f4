use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Polytope;
use crate::control::{FeedbackGain, LinearSystem, Prediction, TerminalIngredients};
use crate::error::{Error, Result};
use crate::linalg::{vstack, vstack_vec};
use crate::solvers::{solve_lp, SolveStatus, SolverConfig};

/// Admissible input sequences in affine form: `U^N(x) = {z : G_z z <= g0 + E_x x}`.
///
/// Rows are stacked stage by stage: state constraints for `k = 0..N`, input
/// constraints for `k = 0..N`, then the terminal set at `k = N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSetRep {
    pub g_z: DMatrix<f64>,
    pub e_x: DMatrix<f64>,
    pub g0: DVector<f64>,
    pub horizon: usize,
}

impl AdmissibleSetRep {
    pub fn new(
        sys: &LinearSystem,
        gain: &FeedbackGain,
        term: &TerminalIngredients,
        state_set: &Polytope,
        input_set: &Polytope,
        horizon: usize,
    ) -> Result<Self> {
        if state_set.dim() != sys.n() || input_set.dim() != sys.m() {
            return Err(Error::DimensionMismatch(
                "constraint sets do not match the system".into(),
            ));
        }
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        let pred = Prediction::new(sys, gain, horizon);
        Ok(Self::from_prediction(&pred, state_set, input_set, &term.xf))
    }

    pub fn from_prediction(
        pred: &Prediction,
        state_set: &Polytope,
        input_set: &Polytope,
        terminal: &Polytope,
    ) -> Self {
        let horizon = pred.horizon();
        let mut gz: Vec<DMatrix<f64>> = Vec::with_capacity(2 * horizon + 1);
        let mut ex = Vec::with_capacity(2 * horizon + 1);
        let mut rhs = Vec::with_capacity(2 * horizon + 1);
        for k in 0..horizon {
            gz.push(state_set.matrix() * &pred.state_z[k]);
            ex.push(-(state_set.matrix() * &pred.state_x[k]));
            rhs.push(state_set.bounds().clone());
            gz.push(input_set.matrix() * &pred.input_z[k]);
            ex.push(-(input_set.matrix() * &pred.input_x[k]));
            rhs.push(input_set.bounds().clone());
        }
        gz.push(terminal.matrix() * &pred.state_z[horizon]);
        ex.push(-(terminal.matrix() * &pred.state_x[horizon]));
        rhs.push(terminal.bounds().clone());
        Self {
            g_z: vstack(&gz.iter().collect::<Vec<_>>()),
            e_x: vstack(&ex.iter().collect::<Vec<_>>()),
            g0: vstack_vec(&rhs.iter().collect::<Vec<_>>()),
            horizon,
        }
    }

    pub fn n(&self) -> usize {
        self.e_x.ncols()
    }

    pub fn d(&self) -> usize {
        self.g_z.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.g0.len()
    }

    fn check(&self, x: &DVector<f64>, z: Option<&DVector<f64>>) -> Result<()> {
        if x.len() != self.n() || z.is_some_and(|z| z.len() != self.d()) {
            return Err(Error::DimensionMismatch(format!(
                "admissible set expects x in R^{} and z in R^{}",
                self.n(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Right-hand side `g0 + E_x x`.
    pub fn rhs(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, None)?;
        Ok(&self.g0 + &self.e_x * x)
    }

    pub fn max_violation(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        self.check(x, Some(z))?;
        Ok((&self.g_z * z - &self.g0 - &self.e_x * x).max())
    }

    pub fn contains(&self, x: &DVector<f64>, z: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.max_violation(x, z)? <= tol)
    }

    /// The polytope `U^N(x)` in z-space. Rows that do not involve `z` are
    /// dropped when satisfied; a violated one is kept and makes the set empty.
    pub fn at(&self, x: &DVector<f64>) -> Result<Polytope> {
        let rhs = self.rhs(x)?;
        let keep: Vec<usize> = (0..rhs.len())
            .filter(|&i| self.g_z.row(i).amax() > 0.0 || rhs[i] < 0.0)
            .collect();
        let g_mat = DMatrix::from_fn(keep.len(), self.d(), |r, c| self.g_z[(keep[r], c)]);
        Polytope::new(
            g_mat,
            DVector::from_iterator(keep.len(), keep.iter().map(|&i| rhs[i])),
        )
    }

    /// Whether `U^N(x)` is nonempty, decided by a feasibility LP.
    pub fn is_feasible(&self, x: &DVector<f64>, cfg: &SolverConfig) -> Result<bool> {
        let res = solve_lp(&DVector::zeros(self.d()), &self.g_z, &self.rhs(x)?, cfg)?;
        match res.status {
            SolveStatus::Optimal => Ok(true),
            SolveStatus::Infeasible => Ok(false),
            _ => Err(Error::SolverFailure(
                "admissibility LP did not terminate".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{rollout, InputSequence};

    fn setup() -> (
        LinearSystem,
        FeedbackGain,
        TerminalIngredients,
        Polytope,
        Polytope,
    ) {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.005, 0.1]),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 0.1),
        )
        .unwrap();
        let gain = FeedbackGain::new(&sys, DMatrix::from_row_slice(1, 2, &[-1.0, -1.5])).unwrap();
        let xf = Polytope::symmetric_box(&[0.2, 0.2]).unwrap();
        let term =
            TerminalIngredients::new(&sys, DMatrix::identity(2, 2), gain.k.clone(), xf).unwrap();
        (
            sys,
            gain,
            term,
            Polytope::symmetric_box(&[1.0, 0.5]).unwrap(),
            Polytope::symmetric_box(&[1.0]).unwrap(),
        )
    }

    #[test]
    fn origin_is_admissible() {
        let (sys, gain, term, xs, us) = setup();
        let rep = AdmissibleSetRep::new(&sys, &gain, &term, &xs, &us, 5).unwrap();
        assert!(rep
            .contains(&DVector::zeros(2), &DVector::zeros(5), 1e-12)
            .unwrap());
        assert!(rep
            .is_feasible(&DVector::zeros(2), &SolverConfig::default())
            .unwrap());
    }

    #[test]
    fn first_input_bound_is_active() {
        let (sys, gain, term, xs, us) = setup();
        let rep = AdmissibleSetRep::new(&sys, &gain, &term, &xs, &us, 5).unwrap();
        let mut z = DVector::zeros(5);
        z[0] = 1.5;
        assert!(!rep.contains(&DVector::zeros(2), &z, 1e-9).unwrap());
    }

    #[test]
    fn infeasible_state_gives_empty_slice() {
        let (sys, gain, term, xs, us) = setup();
        let rep = AdmissibleSetRep::new(&sys, &gain, &term, &xs, &us, 3).unwrap();
        let x = DVector::from_vec(vec![2.0, 0.0]);
        let slice = rep.at(&x).unwrap();
        assert!(slice.is_empty(&SolverConfig::default()).unwrap());
        assert!(!rep.is_feasible(&x, &SolverConfig::default()).unwrap());
    }

    #[test]
    fn rows_match_rollout_constraints() {
        let (sys, gain, term, xs, us) = setup();
        let n_hor = 4;
        let rep = AdmissibleSetRep::new(&sys, &gain, &term, &xs, &us, n_hor).unwrap();
        let x = DVector::from_vec(vec![0.4, -0.1]);
        let z = InputSequence::new(DVector::from_vec(vec![0.3, -0.2, 0.1, 0.05]), n_hor).unwrap();
        let traj = rollout(&sys, &gain, &x, &z).unwrap();
        let mut expected = Vec::new();
        for k in 0..n_hor {
            expected.extend(
                (xs.matrix() * &traj.states[k] - xs.bounds())
                    .iter()
                    .copied(),
            );
            expected.extend(
                (us.matrix() * &traj.controls[k] - us.bounds())
                    .iter()
                    .copied(),
            );
        }
        expected.extend(
            (term.xf.matrix() * &traj.states[n_hor] - term.xf.bounds())
                .iter()
                .copied(),
        );
        let got = &rep.g_z * z.as_vector() - rep.rhs(&x).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
