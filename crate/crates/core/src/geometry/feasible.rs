use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{convex_hull_2d, AdmissibleSetRep};
use crate::error::{Error, Result};
use crate::solvers::{solve_lp, SolveStatus, SolverConfig};

/// Relative pull-back of the ray end points. It absorbs the LP feasibility
/// tolerance so every returned vertex is strictly feasible.
pub const RAY_BACKOFF: f64 = 1e-6;

/// Inner approximation of the planar feasible set by ray shooting.
///
/// Along each of `directions` equally spaced rays the largest `rho` with
/// `U^N(rho * d)` nonempty is found by one LP in `(z, rho)`; the hull of the
/// ray end points, pulled back by `RAY_BACKOFF`, lies inside the feasible set
/// by convexity.
pub fn feasible_set_inner(
    rep: &AdmissibleSetRep,
    directions: usize,
    cfg: &SolverConfig,
) -> Result<Vec<DVector<f64>>> {
    if rep.n() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "ray shooting needs a planar state space, got R^{}",
            rep.n()
        )));
    }
    if directions < 3 {
        return Err(Error::InvalidModel(
            "need at least three ray directions".into(),
        ));
    }
    if !rep.is_feasible(&DVector::zeros(2), cfg)? {
        return Err(Error::OriginInfeasible);
    }
    let ends: Vec<DVector<f64>> = (0..directions)
        .into_par_iter()
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / directions as f64;
            let dir = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            Ok(dir.clone() * (ray_length(rep, &dir, cfg)? * (1.0 - RAY_BACKOFF)))
        })
        .collect::<Result<_>>()?;
    Ok(convex_hull_2d(&ends))
}

/// `max rho s.t. rho >= 0, G_z z - E_x d rho <= g0`.
pub(crate) fn ray_length(
    rep: &AdmissibleSetRep,
    dir: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let d = rep.d();
    let q = rep.num_constraints();
    let mut g_mat = DMatrix::zeros(q + 1, d + 1);
    g_mat.view_mut((0, 0), (q, d)).copy_from(&rep.g_z);
    g_mat
        .view_mut((0, d), (q, 1))
        .copy_from(&(-(&rep.e_x * dir)));
    g_mat[(q, d)] = -1.0;
    let mut g = DVector::zeros(q + 1);
    g.rows_mut(0, q).copy_from(&rep.g0);
    let mut c = DVector::zeros(d + 1);
    c[d] = -1.0;
    let res = solve_lp(&c, &g_mat, &g, cfg)?;
    match res.status {
        SolveStatus::Optimal => Ok(res.z[d].max(0.0)),
        SolveStatus::Unbounded => Err(Error::Unbounded(0)),
        SolveStatus::Infeasible => Err(Error::OriginInfeasible),
        SolveStatus::IterationCap => {
            Err(Error::SolverFailure("ray LP hit its iteration cap".into()))
        }
    }
}
