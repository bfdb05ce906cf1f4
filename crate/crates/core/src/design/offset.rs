use nalgebra::{DMatrix, DVector};

use super::DataSet;
use crate::error::{Error, Result};
use crate::linalg::pinv;

/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Offset `sigma_0(x) = Gamma_0 x + xi_0` from the data: `xi_0 = sum_i w_i z_i`
/// and `Gamma_0 = Z X_s^+` with the state columns centered at `sum_i w_i x_i`.
/// Uniform weights are used when `weights` is `None`.
pub fn fit_offset(data: &DataSet, weights: Option<&[f64]>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let l = data.len();
    let uniform = vec![1.0 / l as f64; l];
    let w = weights.unwrap_or(&uniform);
    if w.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {l} samples",
            w.len()
        )));
    }
    let total: f64 = w.iter().sum();
    if w.iter().any(|&v| v < 0.0 || !v.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel(
            "offset weights must be nonnegative and sum to one".into(),
        ));
    }
    let mut xi = DVector::zeros(data.d());
    let mut x_mean = DVector::zeros(data.n());
    for ((x, z), &wi) in data.states.iter().zip(&data.inputs).zip(w) {
        xi.axpy(wi, z, 1.0);
        x_mean.axpy(wi, x, 1.0);
    }
    let mut xs = data.state_matrix();
    for mut col in xs.column_iter_mut() {
        col -= &x_mean;
    }
    let gamma = data.input_matrix() * pinv(&xs, PINV_RCOND);
    Ok((gamma, xi))
}
