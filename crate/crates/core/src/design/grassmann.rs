use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::qf;

/// A point of `Gr(r, d)` held through a Stiefel representative `U` and its
/// projector `P = U U'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannPoint {
    u: DMatrix<f64>,
    projector: DMatrix<f64>,
}

impl GrassmannPoint {
    /// `u` must have orthonormal columns.
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        let r = u.ncols();
        if r == 0 || r > u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot hold {r} columns in R^{}",
                u.nrows()
            )));
        }
        let err = (u.transpose() * &u - DMatrix::identity(r, r)).norm();
        if err > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "representative is not orthonormal (|U'U - I| = {err:.3e})"
            )));
        }
        let projector = &u * u.transpose();
        Ok(Self { u, projector })
    }

    /// Orthonormalizes an arbitrary full-rank `d x r` matrix.
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(qf(m))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn d(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.u * (self.u.transpose() * v)
    }

    /// Frobenius distance of the projectors.
    pub fn distance(&self, other: &GrassmannPoint) -> f64 {
        (&self.projector - &other.projector).norm()
    }

    /// `(I - U U') G`: the horizontal part of an ambient direction.
    pub fn horizontal(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        g - &self.u * (self.u.transpose() * g)
    }

    /// QR retraction `qf(U + step)`.
    pub fn retract(&self, step: &DMatrix<f64>) -> GrassmannPoint {
        let u = qf(&(&self.u + step));
        let projector = &u * u.transpose();
        GrassmannPoint { u, projector }
    }
}

/// Scatter `S = sum_i delta_i delta_i'` of the shifted data together with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub s: DMatrix<f64>,
    pub trace: f64,
}

impl Scatter {
    pub fn new(deltas: &[DVector<f64>], d: usize) -> Self {
        let mut s = DMatrix::zeros(d, d);
        for delta in deltas {
            s.ger(1.0, delta, delta, 1.0);
        }
        let trace = s.trace();
        Self { s, trace }
    }

    /// `f(P) = sum_i |delta_i - P delta_i|^2 = tr S - tr(U'SU)`.
    pub fn objective(&self, point: &GrassmannPoint) -> f64 {
        let u = point.basis();
        (self.trace - (u.transpose() * &self.s * u).trace()).max(0.0)
    }

    /// Euclidean gradient `-2 S U` of the objective in the representative.
    pub fn euclidean_gradient(&self, point: &GrassmannPoint) -> DMatrix<f64> {
        &self.s * point.basis() * -2.0
    }

    /// Riemannian gradient `-2 (I - UU') S U`.
    pub fn riemannian_gradient(&self, point: &GrassmannPoint) -> DMatrix<f64> {
        point.horizontal(&self.euclidean_gradient(point))
    }

    /// Span of the top `r` eigenvectors of `S`.
    pub fn principal_subspace(&self, r: usize) -> Result<GrassmannPoint> {
        let eig = self.s.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let cols: Vec<_> = order
            .iter()
            .take(r)
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        GrassmannPoint::from_span(&DMatrix::from_columns(&cols))
    }
}

/// Direct evaluation `sum_i |delta_i - P delta_i|^2`.
pub fn objective_f(point: &GrassmannPoint, deltas: &[DVector<f64>]) -> f64 {
    deltas
        .iter()
        .map(|d| (d - point.project(d)).norm_squared())
        .sum()
}
