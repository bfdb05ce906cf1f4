use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};
use crate::solvers::{solve_lp, SolveStatus, SolverConfig};

/// Counter-clockwise convex hull of planar points (Andrew's monotone chain),
/// collinear points removed.
pub fn convex_hull_2d(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts
            .into_iter()
            .map(|(x, y)| DVector::from_vec(vec![x, y]))
            .collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.into_iter()
        .map(|(x, y)| DVector::from_vec(vec![x, y]))
        .collect()
}

/// Initial state set given by its vertices. Planar sets also carry the facet
/// representation; membership in higher dimensions is decided by an LP.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSet {
    vertices: Vec<DVector<f64>>,
    facets: Option<Polytope>,
}

impl InitialSet {
    pub fn from_vertices(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::InvalidModel(
                "initial set needs at least one vertex".into(),
            ));
        };
        let n = first.len();
        if vertices.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(
                "vertices differ in dimension".into(),
            ));
        }
        if n != 2 {
            return Ok(Self {
                vertices,
                facets: None,
            });
        }
        let hull = convex_hull_2d(&vertices);
        if hull.len() < 3 {
            return Err(Error::InvalidModel("initial set has empty interior".into()));
        }
        let k = hull.len();
        let mut g_mat = DMatrix::zeros(k, 2);
        let mut g = DVector::zeros(k);
        for i in 0..k {
            let (p, q) = (&hull[i], &hull[(i + 1) % k]);
            let normal = DVector::from_vec(vec![q[1] - p[1], p[0] - q[0]]);
            let normal = &normal / normal.norm();
            g_mat.set_row(i, &normal.transpose());
            g[i] = normal.dot(p);
        }
        Ok(Self {
            vertices: hull,
            facets: Some(Polytope::new(g_mat, g)?),
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> Option<&Polytope> {
        self.facets.as_ref()
    }

    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let mut lo = self.vertices[0].clone();
        let mut hi = self.vertices[0].clone();
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64, cfg: &SolverConfig) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point in R^{}, set in R^{}",
                x.len(),
                self.dim()
            )));
        }
        if let Some(f) = &self.facets {
            return f.contains(x, tol);
        }
        // Convex weights lambda >= 0 with sum 1 and V lambda = x, as inequalities.
        let n = self.dim();
        let k = self.vertices.len();
        let mut v = DMatrix::zeros(n + 1, k);
        for (j, vert) in self.vertices.iter().enumerate() {
            v.view_mut((0, j), (n, 1)).copy_from(vert);
            v[(n, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(x);
        rhs[n] = 1.0;
        let mut g_mat = DMatrix::zeros(2 * (n + 1) + k, k);
        let mut g = DVector::zeros(2 * (n + 1) + k);
        g_mat.view_mut((0, 0), (n + 1, k)).copy_from(&v);
        g_mat.view_mut((n + 1, 0), (n + 1, k)).copy_from(&(-&v));
        g_mat
            .view_mut((2 * (n + 1), 0), (k, k))
            .copy_from(&(-DMatrix::identity(k, k)));
        g.rows_mut(0, n + 1).copy_from(&rhs.add_scalar(tol));
        g.rows_mut(n + 1, n + 1).copy_from(&(-rhs).add_scalar(tol));
        match solve_lp(&DVector::zeros(k), &g_mat, &g, cfg)?.status {
            SolveStatus::Optimal => Ok(true),
            SolveStatus::Infeasible => Ok(false),
            _ => Err(Error::SolverFailure(
                "hull membership LP did not terminate".into(),
            )),
        }
    }
}
