//! Dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative singular-value cut-off used for pseudo-inverses.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Pseudo-inverse from a truncated SVD together with the numerical rank.
///
/// Singular values below `rel_tol * sigma_max` are treated as zero.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let sigma_max = svd.singular_values.max();
    let cut = rel_tol * sigma_max;
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            // out += v_i * u_i^T / s
            let vi = v_t.row(i).transpose();
            let ui = u.column(i);
            out.ger(1.0 / s, &vi, &ui, 1.0);
        }
    }
    (out, rank)
}

/// Numerical rank using the same relative cut-off as [`pinv`].
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let cut = rel_tol * sv.max();
    sv.iter().filter(|&&s| s > cut && s > 0.0).count()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Orthonormal basis (as rows) of the left null space of `m`.
///
/// Returns a `(rows - rank) x rows` matrix `N` with `N * m = 0` and `N N^T = I`.
pub fn left_null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || m.norm() == 0.0 {
        return DMatrix::identity(rows, rows);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd u");
    let cut = rel_tol * svd.singular_values.max();
    let r = svd.singular_values.iter().filter(|&&s| s > cut).count();
    // Complete the range basis to a full orthonormal basis with a Householder QR.
    let mut aug = DMatrix::zeros(rows, r + rows);
    for j in 0..r {
        aug.set_column(j, &u.column(j));
    }
    aug.view_mut((0, r), (rows, rows)).fill_with_identity();
    let q = aug.qr().q();
    q.columns(r, rows - r).transpose()
}

/// Stack matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::dim("vstack: column counts differ"));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    Ok(out)
}

/// Stack vectors into a single column.
pub fn vcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut i0 = 0;
    for p in parts {
        out.rows_mut(i0, p.len()).copy_from(*p);
        i0 += p.len();
    }
    out
}

/// Block-diagonal matrix from square-or-rectangular blocks.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// `I_n ⊗ diag(d)`: replicate a per-sample diagonal weight over a horizon.
pub fn horizon_diag(per_sample: &[f64], horizon: usize) -> DMatrix<f64> {
    let d = per_sample.len();
    let mut out = DMatrix::zeros(d * horizon, d * horizon);
    for k in 0..horizon {
        for (i, &w) in per_sample.iter().enumerate() {
            out[(k * d + i, k * d + i)] = w;
        }
    }
    out
}

/// Relative Frobenius distance `||a - b|| / max(||b||, tiny)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= rel_tol * m.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_square_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let (p, r) = pinv(&m, DEFAULT_PINV_TOL);
        assert_eq!(r, 2);
        assert!((&m * &p - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn pinv_truncates_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let (p, r) = pinv(&m, DEFAULT_PINV_TOL);
        assert_eq!(r, 1);
        // Penrose condition m p m = m
        assert!((&m * &p * &m - &m).norm() < 1e-12);
    }

    #[test]
    fn left_null_space_annihilates() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0, 3.0, 1.0]);
        let n = left_null_space(&m, 1e-12);
        assert_eq!(n.shape(), (2, 4));
        assert!((&n * &m).norm() < 1e-13);
        assert!((&n * n.transpose() - DMatrix::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn horizon_diag_layout() {
        let w = horizon_diag(&[1.0, 2.0], 2);
        assert_eq!(w[(0, 0)], 1.0);
        assert_eq!(w[(1, 1)], 2.0);
        assert_eq!(w[(3, 3)], 2.0);
        assert_eq!(w[(0, 1)], 0.0);
    }
}
