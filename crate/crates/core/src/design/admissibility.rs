use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::mpc::{CondensedProblem, SubspacePair};
use crate::solvers::{solve_lp, SolveStatus, SolverConfig};

/// Outcome of the vertex test for initial admissibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `alpha_j` with `U alpha_j + sigma(x_bar_j)` admissible, when one exists.
    pub witnesses: Vec<Option<Vec<f64>>>,
    /// Largest distance of the witness to the boundary of `U^N(x_bar_j)` in z-space;
    /// negative when no admissible point exists on the affine subspace.
    pub margins: Vec<f64>,
    /// Vertices without a verified witness.
    pub violated: Vec<usize>,
}

/// Checks `exists alpha : U alpha + sigma(x_bar_j) in U^N(x_bar_j)` for every vertex.
/// By convexity a certificate on the vertices covers their convex hull.
pub fn check_initial_admissibility(
    cp: &CondensedProblem,
    pair: &SubspacePair,
    vertices: &[DVector<f64>],
    tol: f64,
    cfg: &SolverConfig,
) -> Result<AdmissibilityReport> {
    if pair.d() != cp.d() || pair.n() != cp.n() {
        return Err(Error::DimensionMismatch(
            "subspace pair does not match the condensed problem".into(),
        ));
    }
    let sets = vertices
        .iter()
        .map(|v| cp.admissible.at(v)?.translate(&pair.offset(v)))
        .collect::<Result<Vec<_>>>()?;
    span_witnesses(&pair.u, &sets, tol, cfg)
}

/// Checks `exists alpha : U alpha in P_j` for every set.
///
/// Each set gets a max-margin LP in `(alpha, t)` with `t <= 1`; the witness
/// is then re-checked by direct evaluation with tolerance `tol`.
pub fn span_witnesses(
    u: &DMatrix<f64>,
    sets: &[Polytope],
    tol: f64,
    cfg: &SolverConfig,
) -> Result<AdmissibilityReport> {
    if sets.iter().any(|p| p.dim() != u.nrows()) {
        return Err(Error::DimensionMismatch(
            "sets do not live in the ambient space of the basis".into(),
        ));
    }
    let per_set: Vec<(Option<DVector<f64>>, f64)> = sets
        .par_iter()
        .map(|p| set_witness(u, p, tol, cfg))
        .collect::<Result<_>>()?;
    let violated: Vec<usize> = per_set
        .iter()
        .enumerate()
        .filter(|(_, w)| w.0.is_none())
        .map(|(j, _)| j)
        .collect();
    Ok(AdmissibilityReport {
        admissible: violated.is_empty(),
        witnesses: per_set
            .iter()
            .map(|(w, _)| w.as_ref().map(|a| a.iter().copied().collect()))
            .collect(),
        margins: per_set.iter().map(|(_, m)| *m).collect(),
        violated,
    })
}

fn set_witness(
    u: &DMatrix<f64>,
    p: &Polytope,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<(Option<DVector<f64>>, f64)> {
    let r = u.ncols();
    let q = p.num_constraints();
    let mut g_mat = DMatrix::zeros(q + 1, r + 1);
    g_mat.view_mut((0, 0), (q, r)).copy_from(&(p.matrix() * u));
    for i in 0..q {
        g_mat[(i, r)] = p.matrix().row(i).norm();
    }
    g_mat[(q, r)] = 1.0;
    let mut g = DVector::zeros(q + 1);
    g.rows_mut(0, q).copy_from(p.bounds());
    g[q] = 1.0;
    let mut c = DVector::zeros(r + 1);
    c[r] = -1.0;
    let res = solve_lp(&c, &g_mat, &g, cfg)?;
    match res.status {
        SolveStatus::Optimal => {
            let alpha = res.z.rows(0, r).into_owned();
            let ok = p.max_violation(&(u * &alpha))? <= tol;
            Ok((ok.then_some(alpha), res.z[r]))
        }
        SolveStatus::Infeasible => Ok((None, f64::NEG_INFINITY)),
        SolveStatus::Unbounded => Err(Error::SolverFailure(
            "admissibility LP reported unbounded".into(),
        )),
        SolveStatus::IterationCap => Err(Error::SolverFailure(
            "admissibility LP hit its iteration cap".into(),
        )),
    }
}
