//! Brute-force oracles shared by the integration tests. Each one is written
//! independently of the library code path it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn rows(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), g.ncols(), |r, c| g[(idx[r], c)])
}

/// LP oracle: enumerate every basic solution (n linearly independent tight
/// rows), keep the feasible ones, return the best objective value.
pub fn lp_vertex_enumeration(c: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    for s in subsets(h.len(), n) {
        let a = rows(g, &s);
        let b = DVector::from_iterator(n, s.iter().map(|&i| h[i]));
        let lu = a.full_piv_lu();
        if !lu.is_invertible() {
            continue;
        }
        let z = lu.solve(&b).unwrap();
        if (g * &z - h).max() <= 1e-9 {
            let v = c.dot(&z);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Strictly convex QP oracle: for every subset of constraints treated as
/// equalities solve the KKT system, keep the primal-feasible points and
/// return the best one. The true optimum is one of the candidates.
pub fn qp_active_set_enumeration(
    hm: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let n = f.len();
    let q = h.len();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for k in 0..=q.min(n) {
        for s in subsets(q, k) {
            let a = rows(g, &s);
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(hm);
            kkt.view_mut((0, n), (n, k)).copy_from(&a.transpose());
            kkt.view_mut((n, 0), (k, n)).copy_from(&a);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-f));
            for (t, &i) in s.iter().enumerate() {
                rhs[n + t] = h[i];
            }
            let lu = kkt.full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            let sol = lu.solve(&rhs).unwrap();
            let z = sol.rows(0, n).into_owned();
            if q > 0 && (g * &z - h).max() > 1e-9 {
                continue;
            }
            let v = 0.5 * z.dot(&(hm * &z)) + f.dot(&z);
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((z, v));
            }
        }
    }
    best
}

/// Value iteration for the discrete Riccati equation, from `P = Q`.
pub fn riccati_value_iteration(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
) -> DMatrix<f64> {
    let mut p = q.clone();
    for _ in 0..1_000_000 {
        let btpb = r + b.transpose() * &p * b;
        let k = btpb.clone().lu().solve(&(b.transpose() * &p * a)).unwrap();
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * k;
        let next = (&next + next.transpose()) * 0.5;
        let diff = (&next - &p).norm();
        p = next;
        if diff < tol {
            break;
        }
    }
    p
}

/// Structured doubling algorithm for the DARE; a different iteration from
/// value iteration with quadratic convergence.
pub fn riccati_doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut gk = b * r.clone().try_inverse().unwrap() * b.transpose();
    let mut hk = q.clone();
    for _ in 0..100 {
        let w = (&eye + &gk * &hk).try_inverse().unwrap();
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let diff = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if diff < 1e-14 * (1.0 + hk.norm()) {
            break;
        }
    }
    hk
}

/// Grid maximization of the smallest facet distance inside `G z <= g` (2-D).
pub fn grid_chebyshev_2d(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    lo: [f64; 2],
    hi: [f64; 2],
    steps: usize,
) -> ([f64; 2], f64) {
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..=steps {
        for j in 0..=steps {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64;
            let mut dist = f64::INFINITY;
            for k in 0..h.len() {
                let nrm = (g[(k, 0)].powi(2) + g[(k, 1)].powi(2)).sqrt();
                dist = dist.min((h[k] - g[(k, 0)] * x - g[(k, 1)] * y) / nrm);
            }
            if dist > best.1 {
                best = ([x, y], dist);
            }
        }
    }
    best
}

/// Inverted pendulum `x' = (x2, x1 + u)` sampled at 0.1 s, in closed form.
pub fn pendulum_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
    let (c, s) = (0.1f64.cosh(), 0.1f64.sinh());
    (
        DMatrix::from_row_slice(2, 2, &[c, s, s, c]),
        DMatrix::from_row_slice(2, 1, &[c - 1.0, s]),
    )
}

/// Pendulum study: `|x1| <= 1`, `|x2| <= 0.35`, `|u| <= 1`, `Q = I`, `R = 0.1`,
/// LQR terminal ingredients.
pub fn pendulum_setup(horizon: usize) -> grassmpc::mpc::MpcSetup {
    use grassmpc::control::LinearSystem;
    use grassmpc::geometry::Polytope;
    let (a, b) = pendulum_matrices();
    let sys = LinearSystem::new(
        a,
        b,
        DMatrix::identity(2, 2),
        DMatrix::from_element(1, 1, 0.1),
    )
    .unwrap();
    grassmpc::mpc::MpcSetup::lqr(
        sys,
        Polytope::symmetric_box(&[1.0, 0.35]).unwrap(),
        Polytope::symmetric_box(&[1.0]).unwrap(),
        horizon,
        &grassmpc::solvers::SolverConfig::default(),
    )
    .unwrap()
}
