//! Oracles and fixtures shared by the harness tests, written independently of
//! the library code paths they check.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
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

/// Strictly convex QP `min 1/2 z'Hz + f'z s.t. Gz <= g`: solve the equality
/// KKT system for every subset of constraints, keep the feasible candidates
/// and return the best value.
pub fn qp_active_set_enumeration(
    hm: &DMatrix<f64>,
    f: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
) -> Option<f64> {
    let n = f.len();
    let q = h.len();
    let mut best: Option<f64> = None;
    for k in 0..=q.min(n) {
        for s in subsets(q, k) {
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(hm);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-f));
            for (t, &i) in s.iter().enumerate() {
                for c in 0..n {
                    kkt[(n + t, c)] = g[(i, c)];
                    kkt[(c, n + t)] = g[(i, c)];
                }
                rhs[n + t] = h[i];
            }
            let lu = kkt.full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            let z = lu.solve(&rhs).unwrap().rows(0, n).into_owned();
            if q > 0 && (g * &z - h).max() > 1e-9 {
                continue;
            }
            let v = 0.5 * z.dot(&(hm * &z)) + f.dot(&z);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Leading `r` left singular vectors of the data matrix.
pub fn top_singular_subspace(deltas: &[DVector<f64>], r: usize) -> DMatrix<f64> {
    let svd = DMatrix::from_columns(deltas).svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap();
    DMatrix::from_columns(
        &order[..r]
            .iter()
            .map(|&i| u.column(i).into_owned())
            .collect::<Vec<_>>(),
    )
}

/// `|P_a - P_b|_F` for orthonormal bases.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * a.transpose() - b * b.transpose()).norm()
}
