use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vstack;
use crate::solvers::{solve_lp, SolveStatus, SolverConfig};

/// H-representation `{z : G z <= g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson", into = "PolytopeJson")]
pub struct Polytope {
    g_mat: DMatrix<f64>,
    g: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    #[serde(rename = "G")]
    g_mat: Vec<Vec<f64>>,
    g: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<PolytopeJson> for Polytope {
    type Error = Error;

    fn try_from(j: PolytopeJson) -> Result<Self> {
        let dim = j
            .dim
            .or_else(|| j.g_mat.first().map(|r| r.len()))
            .unwrap_or(0);
        if j.g_mat.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("ragged polytope rows".into()));
        }
        let g_mat = DMatrix::from_fn(j.g_mat.len(), dim, |r, c| j.g_mat[r][c]);
        Polytope::new(g_mat, DVector::from_vec(j.g))
    }
}

impl From<Polytope> for PolytopeJson {
    fn from(p: Polytope) -> Self {
        let g_mat = p
            .g_mat
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let dim = if p.g.is_empty() { Some(p.dim()) } else { None };
        PolytopeJson {
            g_mat,
            g: p.g.iter().copied().collect(),
            dim,
        }
    }
}

impl Polytope {
    pub fn new(g_mat: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        if g_mat.nrows() != g.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} bounds",
                g_mat.nrows(),
                g.len()
            )));
        }
        if !g_mat.iter().chain(g.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("polytope contains NaN or Inf".into()));
        }
        Ok(Self { g_mat, g })
    }

    /// Axis-aligned box `lower <= z <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(
                "box bounds differ in length".into(),
            ));
        }
        let n = lower.len();
        let mut g_mat = DMatrix::zeros(2 * n, n);
        let mut g = DVector::zeros(2 * n);
        for i in 0..n {
            g_mat[(2 * i, i)] = 1.0;
            g[2 * i] = upper[i];
            g_mat[(2 * i + 1, i)] = -1.0;
            g[2 * i + 1] = -lower[i];
        }
        Self::new(g_mat, g)
    }

    /// Symmetric box `|z_i| <= bound_i`.
    pub fn symmetric_box(bounds: &[f64]) -> Result<Self> {
        let lower: Vec<f64> = bounds.iter().map(|b| -b).collect();
        Self::from_box(&lower, bounds)
    }

    pub fn dim(&self) -> usize {
        self.g_mat.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.g.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g_mat
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.g
    }

    fn check_dim(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, polytope lives in R^{}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `max(G z - g)`, or `-inf` without constraints.
    pub fn max_violation(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_dim(z)?;
        if self.g.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok((&self.g_mat * z - &self.g).max())
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.max_violation(z)? <= tol)
    }

    /// `max d'z` over the polytope. `None` when the polytope is empty.
    pub fn support(&self, direction: &DVector<f64>, cfg: &SolverConfig) -> Result<Option<f64>> {
        self.check_dim(direction)?;
        let res = solve_lp(&(-direction), &self.g_mat, &self.g, cfg)?;
        match res.status {
            SolveStatus::Optimal => Ok(Some(-res.value)),
            SolveStatus::Infeasible => Ok(None),
            SolveStatus::Unbounded => Ok(Some(f64::INFINITY)),
            SolveStatus::IterationCap => Err(Error::SolverFailure(
                "support LP hit its iteration cap".into(),
            )),
        }
    }

    pub fn is_empty(&self, cfg: &SolverConfig) -> Result<bool> {
        let res = solve_lp(&DVector::zeros(self.dim()), &self.g_mat, &self.g, cfg)?;
        match res.status {
            SolveStatus::Optimal => Ok(false),
            SolveStatus::Infeasible => Ok(true),
            _ => Err(Error::SolverFailure(
                "feasibility LP did not terminate".into(),
            )),
        }
    }

    /// Coordinate-wise bounds from `2 * dim` LPs.
    pub fn bounding_box(&self, cfg: &SolverConfig) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let up = self.support(&e, cfg)?.ok_or(Error::EmptyPolytope)?;
            let down = self.support(&(-&e), cfg)?.ok_or(Error::EmptyPolytope)?;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::Unbounded(i));
            }
            hi[i] = up;
            lo[i] = -down;
        }
        Ok((lo, hi))
    }

    pub fn is_bounded(&self, cfg: &SolverConfig) -> Result<bool> {
        match self.bounding_box(cfg) {
            Ok(_) => Ok(true),
            Err(Error::Unbounded(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Center and radius of the largest inscribed ball: `max r` subject to
    /// `G_i z + r |G_i| <= g_i`, `r >= 0`.
    pub fn chebyshev_center(&self, cfg: &SolverConfig) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        let q = self.num_constraints();
        let mut a = DMatrix::zeros(q + 1, n + 1);
        a.view_mut((0, 0), (q, n)).copy_from(&self.g_mat);
        for i in 0..q {
            a[(i, n)] = self.g_mat.row(i).norm();
        }
        a[(q, n)] = -1.0;
        let mut b = DVector::zeros(q + 1);
        b.rows_mut(0, q).copy_from(&self.g);
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        let res = solve_lp(&c, &a, &b, cfg)?;
        match res.status {
            SolveStatus::Optimal => Ok((res.z.rows(0, n).into_owned(), res.z[n])),
            SolveStatus::Infeasible => Err(Error::EmptyPolytope),
            SolveStatus::Unbounded => Err(Error::Unbounded(0)),
            SolveStatus::IterationCap => Err(Error::SolverFailure(
                "Chebyshev LP hit its iteration cap".into(),
            )),
        }
    }

    /// Rejects empty, unbounded, or flat polytopes.
    pub fn validate_compact(&self, cfg: &SolverConfig) -> Result<()> {
        self.bounding_box(cfg)?;
        let (_, radius) = self.chebyshev_center(cfg)?;
        if radius <= 1e-9 {
            return Err(Error::InvalidModel(format!(
                "polytope has empty interior (inradius {radius:.3e})"
            )));
        }
        Ok(())
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "intersecting R^{} with R^{}",
                self.dim(),
                other.dim()
            )));
        }
        Polytope::new(
            vstack(&[&self.g_mat, &other.g_mat]),
            crate::linalg::vstack_vec(&[&self.g, &other.g]),
        )
    }

    /// `{x : M x in self}`.
    pub fn preimage(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "map has {} rows, polytope lives in R^{}",
                m.nrows(),
                self.dim()
            )));
        }
        Polytope::new(&self.g_mat * m, self.g.clone())
    }

    /// `{z - shift : z in self}`.
    pub fn translate(&self, shift: &DVector<f64>) -> Result<Polytope> {
        self.check_dim(shift)?;
        Polytope::new(self.g_mat.clone(), &self.g - &self.g_mat * shift)
    }

    /// Containment `self ⊆ other` by one LP per row of `other`.
    pub fn is_subset_of(&self, other: &Polytope, tol: f64, cfg: &SolverConfig) -> Result<bool> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(
                "containment across dimensions".into(),
            ));
        }
        for j in 0..other.num_constraints() {
            let row = other.g_mat.row(j).transpose();
            match self.support(&row, cfg)? {
                None => return Ok(true),
                Some(s) if s > other.g[j] + tol * (1.0 + other.g[j].abs()) => return Ok(false),
                Some(_) => {}
            }
        }
        Ok(true)
    }

    pub fn set_equal(&self, other: &Polytope, tol: f64, cfg: &SolverConfig) -> Result<bool> {
        Ok(self.is_subset_of(other, tol, cfg)? && other.is_subset_of(self, tol, cfg)?)
    }

    /// Drops rows implied by the remaining ones (one LP per row).
    pub fn remove_redundant(&self, tol: f64, cfg: &SolverConfig) -> Result<Polytope> {
        let q = self.num_constraints();
        let mut keep = vec![true; q];
        for i in 0..q {
            let norm = self.g_mat.row(i).norm();
            if norm == 0.0 {
                if self.g[i] >= 0.0 {
                    keep[i] = false;
                }
                continue;
            }
            keep[i] = false;
            let rest = self.select_rows(&keep);
            let row = self.g_mat.row(i).transpose();
            let redundant = match rest.support(&row, cfg)? {
                None => true,
                Some(s) => s <= self.g[i] + tol * (norm + self.g[i].abs()),
            };
            keep[i] = !redundant;
        }
        Ok(self.select_rows(&keep))
    }

    fn select_rows(&self, keep: &[bool]) -> Polytope {
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        let g_mat = DMatrix::from_fn(idx.len(), self.dim(), |r, c| self.g_mat[(idx[r], c)]);
        let g = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.g[i]));
        Polytope { g_mat, g }
    }
}
