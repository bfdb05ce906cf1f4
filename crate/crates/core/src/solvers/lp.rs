//! Revised simplex on the dual of `min c'z s.t. G z <= g`.
//!
//! The dual `min g'y s.t. G'y = -c, y >= 0` is in standard form with one row
//! per primal variable, so the basis stays `n x n` no matter how many
//! inequalities there are. Simplex multipliers of the dual are the primal
//! point, reduced costs are primal slacks, and an unbounded dual ray is a
//! Farkas certificate of primal infeasibility.

use nalgebra::{DMatrix, DVector};

use super::{kkt_residual, SolveResult, SolveStatus, SolverConfig};
use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const BLAND_AFTER: usize = 50;

pub fn solve_lp(
    c: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let n = c.len();
    let q = g.len();
    if g_mat.nrows() != q || g_mat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "LP: G is {}x{}, expected {q}x{n}",
            g_mat.nrows(),
            g_mat.ncols()
        )));
    }
    if !c
        .iter()
        .chain(g.iter())
        .chain(g_mat.iter())
        .all(|v| v.is_finite())
    {
        return Err(Error::InvalidModel("LP data contains NaN or Inf".into()));
    }
    if n == 0 {
        return Ok(solve_trivial(g));
    }

    let scale: Vec<f64> = (0..q)
        .map(|i| {
            let s = g_mat.row(i).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut gs = g_mat.clone();
    let mut hs = g.clone();
    for i in 0..q {
        gs.row_mut(i).unscale_mut(scale[i]);
        hs[i] /= scale[i];
    }

    let mut tableau = DualSimplex::new(&gs, &hs, &(-c), cfg);
    let outcome = tableau.run()?;
    let iterations = tableau.iterations;
    let unscale = |y: &DVector<f64>| DVector::from_fn(q, |i, _| y[i] / scale[i]);

    match outcome {
        Outcome::Optimal { point, dual } => {
            let duals = unscale(&dual);
            let value = c.dot(&point);
            let kkt = kkt_residual(None, c, g_mat, g, &point, &duals);
            Ok(SolveResult {
                status: SolveStatus::Optimal,
                z: point,
                value,
                duals,
                kkt_residual: kkt,
                iterations,
                certificate: None,
            })
        }
        Outcome::DualUnbounded { ray } => {
            let mut y = unscale(&ray);
            let total: f64 = y.sum();
            if total > 0.0 {
                y /= total;
            }
            Ok(SolveResult::failed(
                SolveStatus::Infeasible,
                n,
                q,
                iterations,
                Some(y),
            ))
        }
        Outcome::DualInfeasible { primal_ray } => {
            // Either the primal is unbounded or infeasible; settle it with a
            // pure feasibility problem, whose dual is always feasible.
            let feas = solve_lp(&DVector::zeros(n), g_mat, g, cfg)?;
            match feas.status {
                SolveStatus::Optimal => {
                    let norm = primal_ray.norm();
                    let ray = if norm > 0.0 {
                        primal_ray / norm
                    } else {
                        primal_ray
                    };
                    Ok(SolveResult::failed(
                        SolveStatus::Unbounded,
                        n,
                        q,
                        iterations + feas.iterations,
                        Some(ray),
                    ))
                }
                _ => Ok(SolveResult {
                    iterations: iterations + feas.iterations,
                    ..feas
                }),
            }
        }
        Outcome::IterationCap => Ok(SolveResult::failed(
            SolveStatus::IterationCap,
            n,
            q,
            iterations,
            None,
        )),
    }
}

fn solve_trivial(g: &DVector<f64>) -> SolveResult {
    let q = g.len();
    if let Some((i, _)) = g.iter().enumerate().find(|(_, &v)| v < 0.0) {
        let mut y = DVector::zeros(q);
        y[i] = 1.0;
        return SolveResult::failed(SolveStatus::Infeasible, 0, q, 0, Some(y));
    }
    SolveResult {
        status: SolveStatus::Optimal,
        z: DVector::zeros(0),
        value: 0.0,
        duals: DVector::zeros(q),
        kkt_residual: 0.0,
        iterations: 0,
        certificate: None,
    }
}

enum Outcome {
    Optimal {
        point: DVector<f64>,
        dual: DVector<f64>,
    },
    DualUnbounded {
        ray: DVector<f64>,
    },
    DualInfeasible {
        primal_ray: DVector<f64>,
    },
    IterationCap,
}

/// Standard-form problem `min cost'y s.t. A y = b, y >= 0` with `A = [G' | diag(sign b)]`,
/// the trailing `n` columns being phase-one artificials.
struct DualSimplex<'a> {
    gs: &'a DMatrix<f64>,
    cost: &'a DVector<f64>,
    b: DVector<f64>,
    art_sign: Vec<f64>,
    basis: Vec<usize>,
    cfg: &'a SolverConfig,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded(DVector<f64>),
    Cap,
}

impl<'a> DualSimplex<'a> {
    fn new(
        gs: &'a DMatrix<f64>,
        cost: &'a DVector<f64>,
        b: &DVector<f64>,
        cfg: &'a SolverConfig,
    ) -> Self {
        let n = gs.ncols();
        let q = gs.nrows();
        let art_sign = b
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        Self {
            gs,
            cost,
            b: b.clone(),
            art_sign,
            basis: (q..q + n).collect(),
            cfg,
            iterations: 0,
        }
    }

    fn n(&self) -> usize {
        self.gs.ncols()
    }

    fn q(&self) -> usize {
        self.gs.nrows()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.q()
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.q() {
            self.gs.row(j).transpose()
        } else {
            let i = j - self.q();
            let mut e = DVector::zeros(self.n());
            e[i] = self.art_sign[i];
            e
        }
    }

    fn basis_inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut bm = DMatrix::zeros(n, n);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.column(j));
        }
        bm.try_inverse()
            .ok_or_else(|| Error::SolverFailure("singular simplex basis".into()))
    }

    fn phase_cost(&self, phase: u8, j: usize) -> f64 {
        match (phase, self.is_artificial(j)) {
            (1, true) => 1.0,
            (1, false) => 0.0,
            (_, true) => 0.0,
            (_, false) => self.cost[j],
        }
    }

    fn run(&mut self) -> Result<Outcome> {
        match self.iterate(1)? {
            PhaseEnd::Cap => return Ok(Outcome::IterationCap),
            PhaseEnd::Unbounded(_) => {
                return Err(Error::SolverFailure("phase one reported unbounded".into()));
            }
            PhaseEnd::Optimal => {}
        }
        let inv = self.basis_inverse()?;
        let xb = &inv * &self.b;
        let infeas: f64 = self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| self.is_artificial(j))
            .map(|(k, _)| xb[k].max(0.0))
            .sum();
        if infeas > self.cfg.feas_tol * (1.0 + self.b.amax()) {
            let pi = self.multipliers(&inv, 1);
            return Ok(Outcome::DualInfeasible { primal_ray: pi });
        }
        match self.iterate(2)? {
            PhaseEnd::Cap => Ok(Outcome::IterationCap),
            PhaseEnd::Unbounded(ray) => Ok(Outcome::DualUnbounded { ray }),
            PhaseEnd::Optimal => {
                let inv = self.basis_inverse()?;
                let xb = &inv * &self.b;
                let point = self.multipliers(&inv, 2);
                let mut dual = DVector::zeros(self.q());
                for (k, &j) in self.basis.iter().enumerate() {
                    if !self.is_artificial(j) {
                        dual[j] = xb[k].max(0.0);
                    }
                }
                Ok(Outcome::Optimal { point, dual })
            }
        }
    }

    fn multipliers(&self, inv: &DMatrix<f64>, phase: u8) -> DVector<f64> {
        let cb = DVector::from_iterator(
            self.n(),
            self.basis.iter().map(|&j| self.phase_cost(phase, j)),
        );
        inv.transpose() * cb
    }

    fn iterate(&mut self, phase: u8) -> Result<PhaseEnd> {
        let n = self.n();
        let q = self.q();
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.cfg.lp_max_iter {
                return Ok(PhaseEnd::Cap);
            }
            let inv = self.basis_inverse()?;
            let xb = &inv * &self.b;
            let pi = self.multipliers(&inv, phase);
            let bland = degenerate_run >= BLAND_AFTER;

            let mut in_basis = vec![false; q + n];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let gpi = self.gs * &pi;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..q {
                if in_basis[j] {
                    continue;
                }
                let d = self.phase_cost(phase, j) - gpi[j];
                if d < -self.cfg.opt_tol {
                    match entering {
                        None => entering = Some((j, d)),
                        Some((_, best)) if !bland && d < best => entering = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((enter, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let w = &inv * self.column(enter);
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..n {
                let var = self.basis[k];
                let ratio = if phase == 2 && self.is_artificial(var) {
                    if w[k].abs() > self.cfg.pivot_tol {
                        0.0
                    } else {
                        continue;
                    }
                } else if w[k] > self.cfg.pivot_tol {
                    xb[k].max(0.0) / w[k]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((kb, rb)) => {
                        if ratio < rb - 1e-14 {
                            true
                        } else if ratio <= rb + 1e-14 {
                            if bland {
                                var < self.basis[kb]
                            } else {
                                w[k].abs() > w[kb].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }

            let Some((row, ratio)) = leave else {
                let mut ray = DVector::zeros(q);
                ray[enter] = 1.0;
                for k in 0..n {
                    let var = self.basis[k];
                    if !self.is_artificial(var) {
                        ray[var] = (-w[k]).max(0.0);
                    }
                }
                return Ok(PhaseEnd::Unbounded(ray));
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.basis[row] = enter;
            self.iterations += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::verify_farkas;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn interval_minimum() {
        let c = DVector::from_vec(vec![1.0]);
        let gm = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let g = DVector::from_vec(vec![4.0, -2.0]);
        let res = solve_lp(&c, &gm, &g, &cfg()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.z[0] - 2.0).abs() < 1e-12);
        assert!((res.value - 2.0).abs() < 1e-12);
        assert!(res.kkt_residual < 1e-10);
    }

    #[test]
    fn infeasible_interval_has_certificate() {
        let c = DVector::from_vec(vec![0.0]);
        let gm = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let g = DVector::from_vec(vec![1.0, -2.0]);
        let res = solve_lp(&c, &gm, &g, &cfg()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        let y = res.certificate.unwrap();
        assert!(verify_farkas(&gm, &g, &y, 1e-9));
    }

    #[test]
    fn unbounded_ray() {
        let c = DVector::from_vec(vec![-1.0, 0.0]);
        let gm = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let g = DVector::from_vec(vec![0.0, 1.0]);
        let res = solve_lp(&c, &gm, &g, &cfg()).unwrap();
        assert_eq!(res.status, SolveStatus::Unbounded);
        let w = res.certificate.unwrap();
        assert!((&gm * &w).max() <= 1e-12);
        assert!(c.dot(&w) < 0.0);
    }

    #[test]
    fn zero_row_with_negative_rhs_is_infeasible() {
        let c = DVector::from_vec(vec![1.0]);
        let gm = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 0.0]);
        let g = DVector::from_vec(vec![1.0, 1.0, -0.5]);
        let res = solve_lp(&c, &gm, &g, &cfg()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
        assert!(verify_farkas(
            &gm,
            &g,
            res.certificate.as_ref().unwrap(),
            1e-9
        ));
    }

    #[test]
    fn zero_dimensional_problem() {
        let c = DVector::zeros(0);
        let gm = DMatrix::zeros(2, 0);
        let res = solve_lp(&c, &gm, &DVector::from_vec(vec![1.0, 0.0]), &cfg()).unwrap();
        assert!(res.is_optimal());
        let res = solve_lp(&c, &gm, &DVector::from_vec(vec![1.0, -1.0]), &cfg()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = solve_lp(
            &DVector::zeros(2),
            &DMatrix::zeros(3, 1),
            &DVector::zeros(3),
            &cfg(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn degenerate_square_pyramid() {
        // Many constraints through one vertex.
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..12 {
            let t = k as f64 * std::f64::consts::TAU / 12.0;
            rows.extend_from_slice(&[t.cos(), t.sin(), 1.0]);
            rhs.push(1.0);
        }
        rows.extend_from_slice(&[0.0, 0.0, -1.0]);
        rhs.push(0.0);
        let gm = DMatrix::from_row_slice(13, 3, &rows);
        let g = DVector::from_vec(rhs);
        let c = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        let res = solve_lp(&c, &gm, &g, &cfg()).unwrap();
        assert!(res.is_optimal());
        assert!((res.value + 1.0).abs() < 1e-10);
    }
}
