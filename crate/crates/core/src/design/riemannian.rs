use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DesignProblem, GrassmannPoint};
use crate::error::{Error, Result};

/// Safeguarded augmented Lagrangian schedule with a Riemannian gradient
/// descent inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlmConfig {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// The penalty grows unless the violation shrinks below this fraction of the previous one.
    pub required_decrease: f64,
    pub max_penalty: f64,
    pub max_multiplier: f64,
    pub max_outer: usize,
    pub inner_max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Accepted constraint violation of the result.
    pub violation_tol: f64,
    /// Accepted norm of the Riemannian gradient of the Lagrangian.
    pub stationarity_tol: f64,
    /// Violation above which a capped penalty is declared infeasible.
    pub infeasible_tol: f64,
    /// Inner stopping tolerance on the Riemannian gradient norm.
    pub inner_gradient_tol: f64,
    /// Number of past values the Armijo test compares against; 1 is monotone.
    pub nonmonotone_memory: usize,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 5.0,
            required_decrease: 0.25,
            max_penalty: 1e8,
            max_multiplier: 1e8,
            max_outer: 1000,
            inner_max_iter: 500,
            armijo_c: 1e-4,
            backtrack: 0.5,
            violation_tol: 1e-6,
            stationarity_tol: 1e-4,
            infeasible_tol: 1e-4,
            inner_gradient_tol: 1e-6,
            nonmonotone_memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub point: GrassmannPoint,
    pub objective: f64,
    pub max_violation: f64,
    /// Norm of the Riemannian gradient of the Lagrangian at the result.
    pub stationarity: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    pub multipliers: Vec<f64>,
}

/// Minimizes `f(P) = sum_i |delta_i - P delta_i|^2` over `Gr(r, d)` subject to
/// `P delta_bar_j in P_j` for every target.
///
/// Starts from `init` or from the principal subspace of the shifted data.
pub fn design_subspace_riemannian(
    prob: &DesignProblem,
    cfg: &AlmConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<DesignOutcome> {
    let d = prob.d();
    if prob.r == d {
        let point = GrassmannPoint::new(DMatrix::identity(d, d))?;
        let (violation, _) = prob.max_violation(point.projector());
        return Ok(DesignOutcome {
            objective: prob.scatter.objective(&point),
            point,
            max_violation: violation,
            stationarity: 0.0,
            outer_iterations: 0,
            inner_iterations: 0,
            penalty: cfg.initial_penalty,
            multipliers: vec![0.0; prob.num_constraints()],
        });
    }
    let mut point = match init {
        Some(u) => {
            if u.shape() != (d, prob.r) {
                return Err(Error::DimensionMismatch(format!(
                    "initial basis must be {d}x{}",
                    prob.r
                )));
            }
            GrassmannPoint::from_span(u)?
        }
        None => prob.scatter.principal_subspace(prob.r)?,
    };
    let lagrangian = Lagrangian { prob };
    let mut lambda: Vec<DVector<f64>> = prob
        .sets
        .iter()
        .map(|p| DVector::zeros(p.num_constraints()))
        .collect();
    let mut rho = cfg.initial_penalty;
    let mut previous = f64::INFINITY;
    let mut inner_total = 0;
    let mut last = (f64::INFINITY, f64::INFINITY, None);
    for outer in 1..=cfg.max_outer {
        let (next, iters, inner_converged) =
            lagrangian.minimize(point, &lambda, rho, cfg.inner_gradient_tol, cfg);
        point = next;
        inner_total += iters;
        let residuals = lagrangian.residuals(&point);
        for (l, c) in lambda.iter_mut().zip(&residuals) {
            *l = (&*l + c * rho).map(|v| v.clamp(0.0, cfg.max_multiplier));
        }
        let (violation, worst) = prob.max_violation(point.projector());
        let stationarity = lagrangian.gradient(&point, &lambda, None).norm();
        last = (violation, stationarity, worst);
        if violation <= cfg.violation_tol && stationarity <= cfg.stationarity_tol {
            return Ok(DesignOutcome {
                objective: prob.scatter.objective(&point),
                point,
                max_violation: violation,
                stationarity,
                outer_iterations: outer,
                inner_iterations: inner_total,
                penalty: rho,
                multipliers: lambda.iter().flat_map(|l| l.iter().copied()).collect(),
            });
        }
        // A truncated inner solve says nothing about the multiplier progress,
        // so the penalty only grows after converged ones.
        if inner_converged
            && violation > cfg.violation_tol
            && violation > cfg.required_decrease * previous
        {
            if rho >= cfg.max_penalty && violation > cfg.infeasible_tol {
                return Err(Error::InfeasibleDesign {
                    violation,
                    worst_target: worst.unwrap_or(0),
                });
            }
            rho = (rho * cfg.penalty_growth).min(cfg.max_penalty);
        }
        previous = violation;
    }
    let (violation, stationarity, worst) = last;
    if violation > cfg.infeasible_tol {
        return Err(Error::InfeasibleDesign {
            violation,
            worst_target: worst.unwrap_or(0),
        });
    }
    Err(Error::NonConvergence(format!(
        "after {} outer iterations: violation {violation:.3e}, stationarity {stationarity:.3e}, penalty {rho:.1e}",
        cfg.max_outer
    )))
}

/// `L(U) = f(U) + rho/2 * sum_i (max(0, lambda_i/rho + c_i(U))^2 - (lambda_i/rho)^2)` with
/// `c_i(U) = a_i' U U' delta_bar_j - b_i + margin`.
struct Lagrangian<'a> {
    prob: &'a DesignProblem,
}

impl Lagrangian<'_> {
    fn residuals(&self, point: &GrassmannPoint) -> Vec<DVector<f64>> {
        self.prob
            .sets
            .iter()
            .zip(&self.prob.targets)
            .map(|(p, t)| (p.matrix() * point.project(t) - p.bounds()).add_scalar(self.prob.margin))
            .collect()
    }

    fn value(&self, point: &GrassmannPoint, lambda: &[DVector<f64>], rho: f64) -> f64 {
        let mut v = self.prob.scatter.objective(point);
        for (c, l) in self.residuals(point).iter().zip(lambda) {
            for (ci, li) in c.iter().zip(l.iter()) {
                let shifted = (li / rho + ci).max(0.0);
                v += 0.5 * rho * (shifted * shifted - (li / rho).powi(2));
            }
        }
        v
    }

    /// Riemannian gradient with weights `max(0, lambda + rho c)` when `rho` is
    /// given, or with the multipliers themselves otherwise.
    fn gradient(
        &self,
        point: &GrassmannPoint,
        lambda: &[DVector<f64>],
        rho: Option<f64>,
    ) -> DMatrix<f64> {
        let u = point.basis();
        let mut egrad = self.prob.scatter.euclidean_gradient(point);
        let residuals = rho.map(|_| self.residuals(point));
        for (j, (p, t)) in self.prob.sets.iter().zip(&self.prob.targets).enumerate() {
            let w = match (rho, &residuals) {
                (Some(rho), Some(res)) => (&lambda[j] + &res[j] * rho).map(|v| v.max(0.0)),
                _ => lambda[j].clone(),
            };
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            // sum_i w_i (a_i t' + t a_i') U = v (U't)' + t (U'v)'.
            let v = p.matrix().transpose() * w;
            egrad += &v * (u.transpose() * t).transpose() + t * (u.transpose() * &v).transpose();
        }
        point.horizontal(&egrad)
    }

    /// Riemannian gradient descent with Barzilai-Borwein trial steps and
    /// nonmonotone Armijo backtracking along the QR retraction. Returns the
    /// iterate, the iteration count and whether the gradient tolerance was met.
    fn minimize(
        &self,
        mut point: GrassmannPoint,
        lambda: &[DVector<f64>],
        rho: f64,
        tol: f64,
        cfg: &AlmConfig,
    ) -> (GrassmannPoint, usize, bool) {
        let mut value = self.value(&point, lambda, rho);
        let mut grad = self.gradient(&point, lambda, Some(rho));
        let mut history = std::collections::VecDeque::from([value]);
        let mut previous: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        for it in 0..cfg.inner_max_iter {
            let gnorm2 = grad.norm_squared();
            if gnorm2.sqrt() <= tol {
                return (point, it, true);
            }
            let mut step = match &previous {
                Some((s, y)) => {
                    let sy = s.dot(y);
                    if sy > 0.0 {
                        s.norm_squared() / sy
                    } else {
                        1.0 / gnorm2.sqrt()
                    }
                }
                None => 1.0 / (1.0 + gnorm2.sqrt()),
            }
            .clamp(1e-12, 1e6);
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut accepted = None;
            for _ in 0..60 {
                let trial = point.retract(&(&grad * -step));
                let trial_value = self.value(&trial, lambda, rho);
                if trial_value <= reference - cfg.armijo_c * step * gnorm2 {
                    accepted = Some((trial, trial_value));
                    break;
                }
                step *= cfg.backtrack;
            }
            let Some((next, next_value)) = accepted else {
                return (point, it, false);
            };
            let next_grad = self.gradient(&next, lambda, Some(rho));
            previous = Some((next.basis() - point.basis(), &next_grad - &grad));
            point = next;
            value = next_value;
            grad = next_grad;
            history.push_back(value);
            if history.len() > cfg.nonmonotone_memory.max(1) {
                history.pop_front();
            }
        }
        (point, cfg.inner_max_iter, false)
    }
}
