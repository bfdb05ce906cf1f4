use nalgebra::DMatrix;

use super::Polytope;
use crate::error::{Error, Result};
use crate::solvers::SolverConfig;

pub const INVARIANT_MAX_ITER: usize = 500;
const SET_TOL: f64 = 1e-9;

/// Maximal positively invariant subset of `constraint` for `x+ = acl x`.
///
/// Iterates `O_{k+1} = O_k ∩ {x : acl x in O_k}` from `O_0 = constraint` and
/// stops once `O_k` is contained in its own preimage.
pub fn max_invariant_set(
    acl: &DMatrix<f64>,
    constraint: &Polytope,
    cfg: &SolverConfig,
) -> Result<Polytope> {
    if acl.shape() != (constraint.dim(), constraint.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "closed-loop matrix is {}x{}, constraint set lives in R^{}",
            acl.nrows(),
            acl.ncols(),
            constraint.dim()
        )));
    }
    let mut omega = constraint.remove_redundant(SET_TOL, cfg)?;
    for _ in 0..INVARIANT_MAX_ITER {
        let pre = omega.preimage(acl)?;
        if omega.is_subset_of(&pre, SET_TOL, cfg)? {
            return Ok(omega);
        }
        omega = omega.intersect(&pre)?.remove_redundant(SET_TOL, cfg)?;
    }
    Err(Error::IterationCapExceeded(INVARIANT_MAX_ITER))
}
