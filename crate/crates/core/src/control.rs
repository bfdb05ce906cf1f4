//! Linear-system fundamentals: discretization, Riccati synthesis,
//! pre-stabilized rollouts, and the open-loop cost.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{eigenvalues, expm, is_symmetric, min_sym_eigenvalue, rank, spectral_radius};

/// Iteration cap of the Riccati value iteration.
pub const DARE_MAX_ITER: usize = 100_000;
/// Frobenius-norm tolerance on the Riccati fixed-point residual.
pub const DARE_TOL: f64 = 1e-9;

/// `x+ = A x + B u` with stage cost `l(x, u) = x'Qx + u'Ru`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearSystem {
    /// Checks dimensions and that `Q` and `R` are symmetric positive definite.
    /// Stabilizability is reported separately by [`LinearSystem::is_stabilizable`].
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if !a.is_square() || b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if q.shape() != (n, n) || r.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "Q must be {n}x{n} and R {m}x{m}"
            )));
        }
        for (name, w) in [("Q", &q), ("R", &r)] {
            if !is_symmetric(w, 1e-12) {
                return Err(Error::InvalidModel(format!("{name} is not symmetric")));
            }
            if min_sym_eigenvalue(w) <= 1e-10 {
                return Err(Error::InvalidModel(format!(
                    "{name} is not positive definite"
                )));
            }
        }
        Ok(Self { a, b, q, r })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// PBH test: `rank [A - lambda I, B] = n` for every eigenvalue with `|lambda| >= 1`.
    pub fn is_stabilizable(&self) -> bool {
        let n = self.n();
        let m = self.m();
        for lambda in eigenvalues(&self.a) {
            if lambda.norm() < 1.0 - 1e-12 {
                continue;
            }
            // Realify [A - lambda I, B] into a 2n x 2(n+m) matrix.
            let mut big = DMatrix::zeros(2 * n, 2 * (n + m));
            let shifted_re = &self.a - DMatrix::identity(n, n) * lambda.re;
            let im = DMatrix::identity(n, n) * lambda.im;
            big.view_mut((0, 0), (n, n)).copy_from(&shifted_re);
            big.view_mut((0, n), (n, n)).copy_from(&im);
            big.view_mut((n, 0), (n, n)).copy_from(&(-&im));
            big.view_mut((n, n), (n, n)).copy_from(&shifted_re);
            big.view_mut((0, 2 * n), (n, m)).copy_from(&self.b);
            big.view_mut((n, 2 * n + m), (n, m)).copy_from(&self.b);
            if rank(&big, 1e-10) < 2 * n {
                return false;
            }
        }
        true
    }
}

/// Pre-stabilizing state feedback `kappa(x) = K x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGain {
    pub k: DMatrix<f64>,
}

impl FeedbackGain {
    pub fn new(sys: &LinearSystem, k: DMatrix<f64>) -> Result<Self> {
        if k.shape() != (sys.m(), sys.n()) {
            return Err(Error::DimensionMismatch(format!(
                "gain must be {}x{}",
                sys.m(),
                sys.n()
            )));
        }
        let gain = Self { k };
        let rho = spectral_radius(&gain.closed_loop(sys));
        if rho >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "A + BK is not Schur (spectral radius {rho:.6})"
            )));
        }
        Ok(gain)
    }

    pub fn closed_loop(&self, sys: &LinearSystem) -> DMatrix<f64> {
        &sys.a + &sys.b * &self.k
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k * x
    }
}

/// Terminal weight `V_f(x) = x'Pf x`, terminal controller `Kf x`, terminal set `Xf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalIngredients {
    pub pf: DMatrix<f64>,
    pub kf: DMatrix<f64>,
    pub xf: Polytope,
}

impl TerminalIngredients {
    pub fn new(
        sys: &LinearSystem,
        pf: DMatrix<f64>,
        kf: DMatrix<f64>,
        xf: Polytope,
    ) -> Result<Self> {
        let n = sys.n();
        if pf.shape() != (n, n) || kf.shape() != (sys.m(), n) || xf.dim() != n {
            return Err(Error::DimensionMismatch(
                "terminal ingredients do not match the system".into(),
            ));
        }
        if !is_symmetric(&pf, 1e-9) || min_sym_eigenvalue(&pf) <= 0.0 {
            return Err(Error::InvalidModel(
                "terminal weight is not symmetric positive definite".into(),
            ));
        }
        Ok(Self { pf, kf, xf })
    }

    pub fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.pf * x))
    }

    pub fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.kf * x
    }
}

/// Stacked input sequence `(z_0, ..., z_{N-1})`, each `z_k` in `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSequence {
    values: DVector<f64>,
    horizon: usize,
}

impl InputSequence {
    pub fn new(values: DVector<f64>, horizon: usize) -> Result<Self> {
        if horizon == 0 || !values.len().is_multiple_of(horizon) {
            return Err(Error::DimensionMismatch(format!(
                "sequence of length {} does not split into {horizon} blocks",
                values.len()
            )));
        }
        Ok(Self { values, horizon })
    }

    pub fn zeros(horizon: usize, m: usize) -> Self {
        Self {
            values: DVector::zeros(horizon * m),
            horizon,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block_len(&self) -> usize {
        self.values.len() / self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, k: usize) -> DVectorView<'_, f64> {
        let m = self.block_len();
        self.values.rows(k * m, m)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }
}

/// Solves the discrete algebraic Riccati equation by value iteration from
/// `P = Q` and returns `(P_inf, K_inf)` with `K_inf = -(R + B'PB)^-1 B'PA`.
pub fn dare_solve(sys: &LinearSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !sys.is_stabilizable() {
        return Err(Error::NoStabilizingSolution {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let (a, b, q, r) = (&sys.a, &sys.b, &sys.q, &sys.r);
    let mut p = q.clone();
    let mut residual = f64::INFINITY;
    for it in 0..DARE_MAX_ITER {
        let next = riccati_map(a, b, q, r, &p)?;
        let step = (&next - &p).norm();
        p = next;
        if step <= 1e-13 * (1.0 + p.norm()) || it + 1 == DARE_MAX_ITER {
            residual = (riccati_map(a, b, q, r, &p)? - &p).norm();
            break;
        }
    }
    if residual > DARE_TOL {
        return Err(Error::NoStabilizingSolution {
            iterations: DARE_MAX_ITER,
            residual,
        });
    }
    let k = lqr_gain(sys, &p)?;
    if spectral_radius(&(a + b * &k)) >= 1.0 {
        return Err(Error::NoStabilizingSolution {
            iterations: DARE_MAX_ITER,
            residual,
        });
    }
    Ok((p, k))
}

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let pa = p * a;
    let btpb = r + b.transpose() * p * b;
    let gain = btpb
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("R + B'PB lost definiteness".into()))?
        .solve(&(b.transpose() * &pa));
    let next = q + a.transpose() * &pa - pa.transpose() * b * gain;
    Ok((&next + next.transpose()) * 0.5)
}

/// `-(R + B'PB)^-1 B'PA`.
pub fn lqr_gain(sys: &LinearSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let btpb = &sys.r + sys.b.transpose() * p * &sys.b;
    let chol = btpb
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("R + B'PB is not positive definite".into()))?;
    Ok(-chol.solve(&(sys.b.transpose() * p * &sys.a)))
}

/// Frobenius residual of the Riccati equation at `p`.
pub fn riccati_residual(sys: &LinearSystem, p: &DMatrix<f64>) -> f64 {
    match riccati_map(&sys.a, &sys.b, &sys.q, &sys.r, p) {
        Ok(next) => (next - p).norm(),
        Err(_) => f64::INFINITY,
    }
}

/// Zero-order-hold discretization via the exponential of `[[Ac, Bc], [0, 0]] * ts`.
pub fn discretize_zoh(
    ac: &DMatrix<f64>,
    bc: &DMatrix<f64>,
    ts: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(ts > 0.0) {
        return Err(Error::InvalidModel(format!(
            "sampling time must be positive, got {ts}"
        )));
    }
    let n = ac.nrows();
    let m = bc.ncols();
    if !ac.is_square() || bc.nrows() != n {
        return Err(Error::DimensionMismatch(
            "continuous-time model has inconsistent shapes".into(),
        ));
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * ts));
    let e = expm(&aug);
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

/// Pre-stabilized trajectory `x_z(0..=N)` and controls `u_z(0..N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

pub fn rollout(
    sys: &LinearSystem,
    gain: &FeedbackGain,
    x0: &DVector<f64>,
    z: &InputSequence,
) -> Result<Rollout> {
    if x0.len() != sys.n() || z.block_len() != sys.m() || gain.k.shape() != (sys.m(), sys.n()) {
        return Err(Error::DimensionMismatch(
            "rollout data does not match the system".into(),
        ));
    }
    let mut states = Vec::with_capacity(z.horizon() + 1);
    let mut controls = Vec::with_capacity(z.horizon());
    let mut x = x0.clone();
    for k in 0..z.horizon() {
        let u = gain.apply(&x) + z.block(k);
        let next = sys.step(&x, &u);
        states.push(x);
        controls.push(u);
        x = next;
    }
    states.push(x);
    Ok(Rollout { states, controls })
}

/// `J_N(x0, z) = V_f(x_z(N)) + sum_k l(x_z(k), u_z(k))`.
pub fn open_loop_cost(
    sys: &LinearSystem,
    gain: &FeedbackGain,
    term: &TerminalIngredients,
    x0: &DVector<f64>,
    z: &InputSequence,
) -> Result<f64> {
    let traj = rollout(sys, gain, x0, z)?;
    let stages: f64 = traj
        .controls
        .iter()
        .zip(&traj.states)
        .map(|(u, x)| sys.stage_cost(x, u))
        .sum();
    Ok(stages + term.terminal_cost(traj.states.last().unwrap()))
}

/// Affine prediction maps of the pre-stabilized dynamics:
/// `x_z(k, x) = state_x[k] x + state_z[k] z` and
/// `u_z(k, x) = input_x[k] x + input_z[k] z`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub state_x: Vec<DMatrix<f64>>,
    pub state_z: Vec<DMatrix<f64>>,
    pub input_x: Vec<DMatrix<f64>>,
    pub input_z: Vec<DMatrix<f64>>,
}

impl Prediction {
    pub fn new(sys: &LinearSystem, gain: &FeedbackGain, horizon: usize) -> Self {
        let n = sys.n();
        let m = sys.m();
        let d = horizon * m;
        let acl = gain.closed_loop(sys);
        let mut state_x = vec![DMatrix::identity(n, n)];
        let mut state_z = vec![DMatrix::zeros(n, d)];
        let mut input_x = Vec::with_capacity(horizon);
        let mut input_z = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let mut select = DMatrix::zeros(m, d);
            select.view_mut((0, k * m), (m, m)).fill_with_identity();
            input_x.push(&gain.k * &state_x[k]);
            input_z.push(&gain.k * &state_z[k] + &select);
            let mut next_z = &acl * &state_z[k];
            let mut col = next_z.view_mut((0, k * m), (n, m));
            col += &sys.b;
            state_x.push(&acl * &state_x[k]);
            state_z.push(next_z);
        }
        Self {
            state_x,
            state_z,
            input_x,
            input_z,
        }
    }

    pub fn horizon(&self) -> usize {
        self.input_x.len()
    }
}
