use nalgebra::DMatrix;

use super::model::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;

pub const DEFAULT_DARE_TOL: f64 = 1e-12;
pub const DEFAULT_DARE_MAX_ITER: usize = 100_000;

/// One application of the filter Riccati map
/// `P -> A P A^T + Qw - A P C^T (C P C^T + Rv)^{-1} C P A^T`.
pub fn riccati_map(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    qw: &DMatrix<f64>,
    rv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let apc = a * p * c.transpose();
    let s = c * p * c.transpose() + rv;
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("C P C^T + Rv is not positive definite".into()))?
        .inverse();
    let next = a * p * a.transpose() + qw - &apc * s_inv * apc.transpose();
    Ok((&next + next.transpose()) * 0.5)
}

/// Stabilizing solution of the discrete filter Riccati equation by
/// fixed-point iteration from `P = Qw`.
///
/// Converged when `||Ric(P) - P||_F <= tol * max(1, ||P||_F)`.
pub fn dare_solve(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    qw: &DMatrix<f64>,
    rv: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || c.ncols() != n || qw.shape() != (n, n) || rv.shape() != (c.nrows(), c.nrows())
    {
        return Err(Error::dim("dare_solve: inconsistent A, C, Qw, Rv shapes"));
    }
    if rv.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("Rv must be positive definite".into()));
    }
    let mut p = (qw + qw.transpose()) * 0.5;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = riccati_map(a, c, qw, rv, &p)?;
        residual = (&next - &p).norm();
        p = next;
        if !residual.is_finite() || p.norm() > 1e150 {
            return Err(Error::NotDetectable("Riccati iteration diverged".into()));
        }
        if residual <= tol * p.norm().max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::RiccatiNonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Steady-state Kalman gain `K = A P C^T (C P C^T + Rv)^{-1}` in predictor form.
pub fn kalman_gain(
    model: &StateSpaceModel,
    qw: &DMatrix<f64>,
    rv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    predictor_gain(model.a(), model.c(), qw, rv)
}

fn predictor_gain(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    qw: &DMatrix<f64>,
    rv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = dare_solve(a, c, qw, rv, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)?;
    let s = c * &p * c.transpose() + rv;
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("innovation covariance not positive definite".into()))?
        .inverse();
    let k = a * &p * c.transpose() * s_inv;
    let rho = spectral_radius(&(a - &k * c));
    if rho >= 1.0 {
        return Err(Error::NotDetectable(format!(
            "A - K C has spectral radius {rho}"
        )));
    }
    Ok(k)
}

/// Output injection `L_c` with `A_c + L_c C_c` Schur stable.
///
/// Already-stable `A_c` returns zero; otherwise the gain is the negated
/// filter gain of `(A_c, C_c)` with identity weights.
pub fn stabilizing_output_injection(a_c: &DMatrix<f64>, c_c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = (a_c.nrows(), c_c.nrows());
    if spectral_radius(a_c) < 1.0 {
        return Ok(DMatrix::zeros(n, p));
    }
    let k = predictor_gain(a_c, c_c, &DMatrix::identity(n, n), &DMatrix::identity(p, p))?;
    Ok(-k)
}
