use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataSet, Scatter};
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::mpc::MpcSetup;
use crate::solvers::SolverConfig;

/// Interior point used as the design target inside each shifted admissible set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    /// Center of the largest inscribed ball.
    #[default]
    Chebyshev,
    /// Minimizer of the logarithmic barrier.
    Analytic,
}

pub fn center(p: &Polytope, method: CenterMethod, cfg: &SolverConfig) -> Result<DVector<f64>> {
    let (cheb, radius) = p.chebyshev_center(cfg)?;
    if radius <= 0.0 {
        return Err(Error::InvalidModel(
            "set has empty interior; no interior center exists".into(),
        ));
    }
    match method {
        CenterMethod::Chebyshev => Ok(cheb),
        CenterMethod::Analytic => Ok(analytic_center(p, cheb)),
    }
}

/// Damped Newton on `-sum log(g - G z)` from a strictly interior start.
fn analytic_center(p: &Polytope, start: DVector<f64>) -> DVector<f64> {
    let rows: Vec<usize> = (0..p.num_constraints())
        .filter(|&i| p.matrix().row(i).amax() > 0.0)
        .collect();
    let g_mat = DMatrix::from_fn(rows.len(), p.dim(), |r, c| p.matrix()[(rows[r], c)]);
    let g = DVector::from_iterator(rows.len(), rows.iter().map(|&i| p.bounds()[i]));
    let barrier = |z: &DVector<f64>| -> f64 {
        let s = &g - &g_mat * z;
        if s.iter().any(|&v| v <= 0.0) {
            f64::INFINITY
        } else {
            -s.iter().map(|v| v.ln()).sum::<f64>()
        }
    };
    let mut z = start;
    for _ in 0..100 {
        let s = &g - &g_mat * &z;
        let inv = s.map(|v| 1.0 / v);
        let grad = g_mat.transpose() * &inv;
        let scaled = DMatrix::from_fn(g_mat.nrows(), g_mat.ncols(), |r, c| g_mat[(r, c)] * inv[r]);
        let hess = scaled.transpose() * &scaled;
        let Some(step) = hess.cholesky().map(|c| -c.solve(&grad)) else {
            break;
        };
        let decrement = -grad.dot(&step);
        if decrement < 1e-20 {
            break;
        }
        let f0 = barrier(&z);
        let mut t = 1.0;
        while barrier(&(&z + &step * t)) > f0 - 0.25 * t * decrement && t > 1e-12 {
            t *= 0.5;
        }
        z += step * t;
    }
    z
}

/// Subspace design data: the shifted samples (through their scatter), one
/// target `delta_bar_j` per initial-set vertex, and the shifted admissible
/// sets `P_j` with unit-norm rows.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub scatter: Scatter,
    pub targets: Vec<DVector<f64>>,
    pub sets: Vec<Polytope>,
    pub r: usize,
    /// Constraints are tightened to `a' P delta_bar <= b - margin`.
    pub margin: f64,
}

impl DesignProblem {
    pub fn new(
        deltas: &[DVector<f64>],
        targets: Vec<DVector<f64>>,
        sets: Vec<Polytope>,
        r: usize,
        margin: f64,
    ) -> Result<Self> {
        let d = deltas
            .first()
            .map(|v| v.len())
            .or_else(|| targets.first().map(|v| v.len()))
            .ok_or_else(|| Error::InvalidModel("design problem needs data".into()))?;
        if deltas.iter().chain(&targets).any(|v| v.len() != d) || sets.iter().any(|p| p.dim() != d)
        {
            return Err(Error::DimensionMismatch(format!(
                "design data must live in R^{d}"
            )));
        }
        if targets.len() != sets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} sets",
                targets.len(),
                sets.len()
            )));
        }
        if r == 0 || r > d {
            return Err(Error::InvalidModel(format!(
                "subspace dimension {r} is not in 1..={d}"
            )));
        }
        if !(margin >= 0.0) {
            return Err(Error::InvalidModel(
                "constraint margin must be nonnegative".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(sets.len());
        for (j, (p, target)) in sets.iter().zip(&targets).enumerate() {
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for i in 0..p.num_constraints() {
                let norm = p.matrix().row(i).norm();
                if norm == 0.0 {
                    if p.bounds()[i] < 0.0 {
                        return Err(Error::InvalidModel(format!("set {j} is empty")));
                    }
                    continue;
                }
                rows.push(p.matrix().row(i) / norm);
                rhs.push(p.bounds()[i] / norm);
            }
            let set = Polytope::new(
                if rows.is_empty() {
                    DMatrix::zeros(0, d)
                } else {
                    DMatrix::from_rows(&rows)
                },
                DVector::from_vec(rhs),
            )?;
            let slack = set.max_violation(target)?;
            if slack >= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "target {j} is not strictly inside its set (slack {:.3e})",
                    -slack
                )));
            }
            normalized.push(set);
        }
        Ok(Self {
            scatter: Scatter::new(deltas, d),
            targets,
            sets: normalized,
            r,
            margin,
        })
    }

    /// Builds the problem for an MPC setup: `delta_i = z_i - sigma_0(x_i)`,
    /// `P_j = U^N(x_bar_j) - sigma_0(x_bar_j)` pruned of redundant rows, and
    /// targets at the chosen center of each `P_j`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_setup(
        setup: &MpcSetup,
        data: &DataSet,
        gamma: &DMatrix<f64>,
        xi: &DVector<f64>,
        vertices: &[DVector<f64>],
        r: usize,
        method: CenterMethod,
        margin: f64,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let deltas = data.shifted(gamma, xi);
        let built: Vec<(Polytope, DVector<f64>)> = vertices
            .par_iter()
            .map(|v| {
                let shift = gamma * v + xi;
                let set = setup
                    .problem
                    .admissible
                    .at(v)?
                    .translate(&shift)?
                    .remove_redundant(1e-9, cfg)?;
                let target = center(&set, method, cfg).map_err(|e| match e {
                    Error::EmptyPolytope => {
                        Error::Infeasible(format!("vertex {v:?} has no admissible input sequence"))
                    }
                    other => other,
                })?;
                Ok((set, target))
            })
            .collect::<Result<_>>()?;
        let (sets, targets) = built.into_iter().unzip();
        Self::new(&deltas, targets, sets, r, margin)
    }

    pub fn d(&self) -> usize {
        self.scatter.s.nrows()
    }

    pub fn num_constraints(&self) -> usize {
        self.sets.iter().map(|p| p.num_constraints()).sum()
    }

    /// Largest violation `max(G_j P delta_bar_j - g_j + margin, 0)` over all sets,
    /// together with the index of the worst set.
    pub fn max_violation(&self, projector: &DMatrix<f64>) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (j, (p, t)) in self.sets.iter().zip(&self.targets).enumerate() {
            if p.num_constraints() == 0 {
                continue;
            }
            let v = (p.matrix() * (projector * t) - p.bounds()).max() + self.margin;
            if v > worst.0 {
                worst = (v, Some(j));
            }
        }
        worst
    }
}
