//! Full-order and reduced-order MPC on a pre-stabilized linear plant.

mod closed_loop;
mod full;
mod reduced;

pub use closed_loop::{
    closed_loop_cost, run_closed_loop, run_full_closed_loop, ClosedLoopConfig, ClosedLoopCost,
    ClosedLoopTrace, StepRecord,
};
pub use full::{condense, solve_full, CondensedProblem, FullSolution};
pub use reduced::{admissible_shift, solve_reduced, ExtendedState, ReducedSolution, SubspacePair};

use serde::{Deserialize, Serialize};

use crate::control::{dare_solve, FeedbackGain, LinearSystem, TerminalIngredients};
use crate::error::{Error, Result};
use crate::geometry::{max_invariant_set, Polytope};
use crate::linalg::{max_sym_eigenvalue, min_sym_eigenvalue};
use crate::solvers::SolverConfig;

/// Plant, constraints, pre-stabilizing gain and terminal ingredients together
/// with the condensed problem for one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcSetup {
    pub sys: LinearSystem,
    pub gain: FeedbackGain,
    pub term: TerminalIngredients,
    pub state_set: Polytope,
    pub input_set: Polytope,
    pub problem: CondensedProblem,
}

impl MpcSetup {
    pub fn new(
        sys: LinearSystem,
        gain: FeedbackGain,
        term: TerminalIngredients,
        state_set: Polytope,
        input_set: Polytope,
        horizon: usize,
    ) -> Result<Self> {
        let problem = condense(&sys, &gain, &term, &state_set, &input_set, horizon)?;
        Ok(Self {
            sys,
            gain,
            term,
            state_set,
            input_set,
            problem,
        })
    }

    /// LQR ingredients: `K = Kf = K_inf`, `Pf = P_inf`, and `Xf` the maximal
    /// invariant set of `A + B K_inf` inside `X ∩ {x : K_inf x in U}`.
    pub fn lqr(
        sys: LinearSystem,
        state_set: Polytope,
        input_set: Polytope,
        horizon: usize,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        if state_set.dim() != sys.n() || input_set.dim() != sys.m() {
            return Err(Error::DimensionMismatch(
                "constraint sets do not match the system".into(),
            ));
        }
        state_set.validate_compact(cfg)?;
        input_set.validate_compact(cfg)?;
        let (pinf, kinf) = dare_solve(&sys)?;
        let gain = FeedbackGain::new(&sys, kinf.clone())?;
        let admissible_states = state_set.intersect(&input_set.preimage(&kinf)?)?;
        let xf = max_invariant_set(&gain.closed_loop(&sys), &admissible_states, cfg)?;
        let term = TerminalIngredients::new(&sys, pinf, kinf, xf)?;
        Self::new(sys, gain, term, state_set, input_set, horizon)
    }

    pub fn horizon(&self) -> usize {
        self.problem.horizon
    }

    /// Same plant and ingredients with another horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(
            self.sys.clone(),
            self.gain.clone(),
            self.term.clone(),
            self.state_set.clone(),
            self.input_set.clone(),
            horizon,
        )
    }

    /// Checks the terminal ingredients: `Xf ⊆ X`, `Kf Xf ⊆ U`, invariance of
    /// `Xf` under `A + B Kf`, origin in the interior, and the Lyapunov decrease
    /// `Pf - Acl' Pf Acl - Q - Kf' R Kf ⪰ 0`.
    pub fn verify_terminal(&self, cfg: &SolverConfig) -> Result<()> {
        let tol = 1e-9;
        let xf = &self.term.xf;
        let fail = |what: &str| Err(Error::InvalidModel(format!("terminal ingredients: {what}")));
        if !xf.is_subset_of(&self.state_set, tol, cfg)? {
            return fail("terminal set is not inside the state constraints");
        }
        if !xf.is_subset_of(&self.input_set.preimage(&self.term.kf)?, tol, cfg)? {
            return fail("terminal controller violates the input constraints");
        }
        let acl = &self.sys.a + &self.sys.b * &self.term.kf;
        if !xf.is_subset_of(&xf.preimage(&acl)?, tol, cfg)? {
            return fail("terminal set is not invariant");
        }
        if xf.bounds().iter().any(|&b| b <= 0.0) {
            return fail("origin is not in the interior of the terminal set");
        }
        let pf = &self.term.pf;
        let decrease = pf
            - acl.transpose() * pf * &acl
            - &self.sys.q
            - self.term.kf.transpose() * &self.sys.r * &self.term.kf;
        if min_sym_eigenvalue(&decrease) < -1e-9 * max_sym_eigenvalue(pf).max(1.0) {
            return fail("terminal cost does not decrease along the terminal controller");
        }
        Ok(())
    }
}
