//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 0.5, the series
/// is summed until the norm of the next term drops below `1e-14`, and the
/// result is squared `s` times.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.nrows();
    let norm = one_norm(m);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = m / 2f64.powi(squarings as i32);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..200 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.norm() < 1e-14 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

/// Moore-Penrose pseudoinverse; singular values below `rcond * sigma_max` are
/// treated as zero.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(cols, rows);
    }
    let cutoff = rcond * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > tol * smax.max(1.0)).count()
}

/// Q factor of a thin QR decomposition with the signs fixed so that `R` has a
/// nonnegative diagonal. This is the `qf` retraction map on the Stiefel manifold.
pub fn qf(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed random orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    qf(&g)
}

/// Random point on the Stiefel manifold `St(r, d)`.
pub fn random_stiefel<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, r, |_, _| standard_normal(rng));
    qf(&g)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Stack matrices vertically; all blocks must share a column count.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

pub fn vstack_vec(blocks: &[&DVector<f64>]) -> DVector<f64> {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(n);
    let mut r0 = 0;
    for b in blocks {
        out.rows_mut(r0, b.len()).copy_from(*b);
        r0 += b.len();
    }
    out
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
