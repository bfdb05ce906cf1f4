//! Primal active-set method for convex QPs `min 1/2 z'Hz + f'z s.t. G z <= g`.
//!
//! A feasible start comes from the warm point when it is feasible, otherwise
//! from a phase-one LP (which also yields the Farkas certificate when the
//! feasible set is empty). Strictly convex problems solve the equality
//! subproblems through the full KKT system; singular-PSD Hessians go through a
//! null-space step that follows zero-curvature descent directions until a
//! constraint blocks, followed by a polish with `H + polish_reg * I` that
//! selects the minimum-norm minimizer.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{kkt_residual, solve_lp, SolveResult, SolveStatus, SolverConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g_mat: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        g_mat: DMatrix<f64>,
        g: DVector<f64>,
    ) -> Result<Self> {
        let n = f.len();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "QP Hessian is {}x{}, expected {n}x{n}",
                h.nrows(),
                h.ncols()
            )));
        }
        if g_mat.ncols() != n || g_mat.nrows() != g.len() {
            return Err(Error::DimensionMismatch(format!(
                "QP constraints are {}x{} with {} bounds, expected {n} columns",
                g_mat.nrows(),
                g_mat.ncols(),
                g.len()
            )));
        }
        if !h
            .iter()
            .chain(f.iter())
            .chain(g_mat.iter())
            .chain(g.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidModel("QP data contains NaN or Inf".into()));
        }
        Ok(Self { h, f, g_mat, g })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        if self.g.is_empty() {
            return 0.0;
        }
        (&self.g_mat * z - &self.g).max()
    }
}

pub fn solve_qp(
    qp: &QuadraticProgram,
    warm: Option<&DVector<f64>>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let n = qp.dim();
    let q = qp.g.len();
    if n == 0 {
        return solve_lp(&qp.f, &qp.g_mat, &qp.g, cfg);
    }
    let hs = (&qp.h + qp.h.transpose()) * 0.5;
    if (&hs - &qp.h).amax() > 1e-9 * (1.0 + qp.h.amax()) {
        return Err(Error::InvalidModel("QP Hessian is not symmetric".into()));
    }
    let eig = hs.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    if lmin < -1e-9 * lmax.abs().max(1.0) {
        return Err(Error::InvalidModel(format!(
            "QP Hessian is indefinite (min eigenvalue {lmin:.3e})"
        )));
    }
    let singular = lmin <= cfg.singular_tol * lmax.max(f64::MIN_POSITIVE);

    let (start, mut iterations) = match warm {
        Some(w) if w.len() == n && qp.max_violation(w) <= cfg.feas_tol => (w.clone(), 0),
        _ => {
            let phase_one = solve_lp(&DVector::zeros(n), &qp.g_mat, &qp.g, cfg)?;
            match phase_one.status {
                SolveStatus::Optimal => (phase_one.z, phase_one.iterations),
                _ => return Ok(phase_one),
            }
        }
    };

    let engine = ActiveSet {
        h: &hs,
        f: &qp.f,
        g_mat: &qp.g_mat,
        g: &qp.g,
        cfg,
    };
    let mut outcome = engine.run(start, singular)?;
    if singular {
        if let Run::Done { z, iterations: it } = &outcome {
            iterations += it;
            let reg = &hs + DMatrix::identity(n, n) * (cfg.polish_reg * lmax.max(1.0));
            let polish = ActiveSet {
                h: &reg,
                f: &qp.f,
                g_mat: &qp.g_mat,
                g: &qp.g,
                cfg,
            };
            let base = qp.objective(z);
            if let Run::Done {
                z: zp,
                iterations: itp,
            } = polish.run(z.clone(), false)?
            {
                if qp.objective(&zp) <= base + 1e-12 * (1.0 + base.abs()) {
                    outcome = Run::Done {
                        z: zp,
                        iterations: itp,
                    };
                } else {
                    outcome = Run::Done {
                        z: z.clone(),
                        iterations: 0,
                    };
                }
            } else {
                outcome = Run::Done {
                    z: z.clone(),
                    iterations: 0,
                };
            }
        }
    }

    match outcome {
        Run::Done { z, iterations: it } => {
            iterations += it;
            let duals = engine.multipliers_for(&z);
            let kkt = kkt_residual(Some(&qp.h), &qp.f, &qp.g_mat, &qp.g, &z, &duals);
            Ok(SolveResult {
                status: SolveStatus::Optimal,
                value: qp.objective(&z),
                z,
                duals,
                kkt_residual: kkt,
                iterations,
                certificate: None,
            })
        }
        Run::Unbounded {
            ray,
            iterations: it,
        } => Ok(SolveResult::failed(
            SolveStatus::Unbounded,
            n,
            q,
            iterations + it,
            Some(ray),
        )),
        Run::Cap => Ok(SolveResult::failed(
            SolveStatus::IterationCap,
            n,
            q,
            iterations + cfg.qp_max_iter,
            None,
        )),
    }
}

enum Run {
    Done {
        z: DVector<f64>,
        iterations: usize,
    },
    Unbounded {
        ray: DVector<f64>,
        iterations: usize,
    },
    Cap,
}

struct ActiveSet<'a> {
    h: &'a DMatrix<f64>,
    f: &'a DVector<f64>,
    g_mat: &'a DMatrix<f64>,
    g: &'a DVector<f64>,
    cfg: &'a SolverConfig,
}

struct Step {
    p: DVector<f64>,
    /// Multipliers of the working rows (only meaningful when `p` is zero).
    lambda: DVector<f64>,
    /// A zero-curvature descent direction: the step length is not capped at one.
    ray: bool,
}

impl ActiveSet<'_> {
    fn n(&self) -> usize {
        self.f.len()
    }

    fn working_matrix(&self, working: &[usize]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(working.len(), self.n());
        for (k, &i) in working.iter().enumerate() {
            a.set_row(k, &self.g_mat.row(i));
        }
        a
    }

    fn run(&self, mut z: DVector<f64>, singular: bool) -> Result<Run> {
        let q = self.g.len();
        let row_norm: Vec<f64> = (0..q).map(|i| self.g_mat.row(i).norm()).collect();
        let mut working: Vec<usize> = Vec::new();
        let mut at_subspace_min = false;

        for it in 0..self.cfg.qp_max_iter {
            let grad = self.h * &z + self.f;
            let step = if singular {
                self.nullspace_step(&grad, &working)
            } else {
                self.kkt_step(&grad, &working)?
            };
            let zscale = 1.0 + z.amax();
            let p_is_zero = at_subspace_min || step.p.amax() <= 1e-13 * zscale;

            if p_is_zero {
                let lambda = if singular {
                    self.least_squares_multipliers(&grad, &working)
                } else {
                    step.lambda
                };
                let tol = self.cfg.opt_tol * (1.0 + grad.amax());
                let mut most_negative: Option<(usize, f64)> = None;
                for (k, &l) in lambda.iter().enumerate() {
                    if l < -tol && most_negative.is_none_or(|(_, b)| l < b) {
                        most_negative = Some((k, l));
                    }
                }
                match most_negative {
                    None => return Ok(Run::Done { z, iterations: it }),
                    Some((k, _)) => {
                        working.remove(k);
                        at_subspace_min = false;
                        continue;
                    }
                }
            }

            let p = step.p;
            let pscale = p.norm();
            let mut alpha = if step.ray { f64::INFINITY } else { 1.0 };
            let mut blocking = None;
            for (i, &norm) in row_norm.iter().enumerate() {
                if working.contains(&i) {
                    continue;
                }
                let ap = self.g_mat.row(i).dot(&p.transpose());
                if ap > 1e-12 * norm * pscale {
                    let slack = (self.g[i] - self.g_mat.row(i).dot(&z.transpose())).max(0.0);
                    let a = slack / ap;
                    if a < alpha {
                        alpha = a;
                        blocking = Some(i);
                    }
                }
            }
            if !alpha.is_finite() {
                return Ok(Run::Unbounded {
                    ray: p / pscale,
                    iterations: it,
                });
            }
            z += &p * alpha;
            match blocking {
                Some(i) => {
                    working.push(i);
                    at_subspace_min = false;
                }
                None => at_subspace_min = !step.ray,
            }
        }
        Ok(Run::Cap)
    }

    /// Solves `[H A'; A 0] [p; lambda] = [-grad; 0]`.
    fn kkt_step(&self, grad: &DVector<f64>, working: &[usize]) -> Result<Step> {
        let n = self.n();
        let k = working.len();
        let a = self.working_matrix(working);
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(self.h);
        kkt.view_mut((0, n), (n, k)).copy_from(&a.transpose());
        kkt.view_mut((n, 0), (k, n)).copy_from(&a);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-grad));
        let sol = kkt
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolverFailure("singular KKT system in active-set step".into()))?;
        Ok(Step {
            p: sol.rows(0, n).into_owned(),
            lambda: sol.rows(n, k).into_owned(),
            ray: false,
        })
    }

    /// Null-space step for PSD Hessians: Newton on the curved part, or a
    /// descent ray along a flat direction when the gradient has a component there.
    fn nullspace_step(&self, grad: &DVector<f64>, working: &[usize]) -> Step {
        let n = self.n();
        let basis = self.null_basis(working);
        let empty = DVector::zeros(working.len());
        if basis.ncols() == 0 {
            return Step {
                p: DVector::zeros(n),
                lambda: empty,
                ray: false,
            };
        }
        let hz = basis.transpose() * self.h * &basis;
        let gz = basis.transpose() * grad;
        let eig = SymmetricEigen::new((&hz + hz.transpose()) * 0.5);
        let lmax = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let flat_tol = 1e-10 * lmax.max(1.0);
        let gtol = 1e-12 * (1.0 + grad.amax());
        let mut best_flat: Option<(usize, f64)> = None;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l <= flat_tol {
                let c = eig.eigenvectors.column(k).dot(&gz);
                if c.abs() > gtol && best_flat.is_none_or(|(_, b)| c.abs() > b.abs()) {
                    best_flat = Some((k, c));
                }
            }
        }
        if let Some((k, c)) = best_flat {
            let dir = &basis * eig.eigenvectors.column(k) * (-c.signum());
            return Step {
                p: dir,
                lambda: empty,
                ray: true,
            };
        }
        let mut pz = DVector::zeros(basis.ncols());
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > flat_tol {
                let v = eig.eigenvectors.column(k);
                pz -= v * (v.dot(&gz) / l);
            }
        }
        Step {
            p: &basis * pz,
            lambda: empty,
            ray: false,
        }
    }

    fn null_basis(&self, working: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        if working.is_empty() {
            return DMatrix::identity(n, n);
        }
        let a = self.working_matrix(working);
        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata);
        let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
        let cols: Vec<DVector<f64>> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l <= tol)
            .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// Least-squares solution of `A' lambda = -grad` over the working rows.
    fn least_squares_multipliers(&self, grad: &DVector<f64>, working: &[usize]) -> DVector<f64> {
        if working.is_empty() {
            return DVector::zeros(0);
        }
        let a = self.working_matrix(working);
        let at = a.transpose();
        let svd = at.svd(true, true);
        svd.solve(&(-grad), 1e-13)
            .unwrap_or_else(|_| DVector::zeros(working.len()))
    }

    /// Multipliers for all rows at a solution: least squares on the rows that
    /// are active within tolerance, restricted to nonnegative values.
    fn multipliers_for(&self, z: &DVector<f64>) -> DVector<f64> {
        let q = self.g.len();
        let grad = self.h * z + self.f;
        let slack = self.g - self.g_mat * z;
        let active: Vec<usize> = (0..q)
            .filter(|&i| {
                slack[i] <= 1e-9 * (1.0 + self.g[i].abs()) * self.g_mat.row(i).norm().max(1.0)
            })
            .collect();
        let mut duals = DVector::zeros(q);
        if active.is_empty() {
            return duals;
        }
        let lambda = nonnegative_least_squares(&self.working_matrix(&active).transpose(), &(-grad));
        for (k, &i) in active.iter().enumerate() {
            duals[i] = lambda[k];
        }
        duals
    }
}

/// Lawson-Hanson NNLS: `min |A x - b|` over `x >= 0`.
fn nonnegative_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = a.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let tol = 1e-13 * (1.0 + b.amax()) * (1.0 + a.amax());
    for _ in 0..(3 * m + 10) {
        let w = a.transpose() * (b - a * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !passive[j] && w[j] > tol && best.is_none_or(|(_, v)| w[j] > v) {
                best = Some((j, w[j]));
            }
        }
        let Some((j, _)) = best else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..m).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_columns(
                &idx.iter()
                    .map(|&k| a.column(k).into_owned())
                    .collect::<Vec<_>>(),
            );
            let s = sub
                .svd(true, true)
                .solve(b, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            if s.iter().all(|&v| v > 0.0) {
                for (t, &k) in idx.iter().enumerate() {
                    x[k] = s[t];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (t, &k) in idx.iter().enumerate() {
                if s[t] <= 0.0 {
                    let denom = x[k] - s[t];
                    if denom > 0.0 {
                        alpha = alpha.min(x[k] / denom);
                    }
                }
            }
            for (t, &k) in idx.iter().enumerate() {
                x[k] += alpha * (s[t] - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
