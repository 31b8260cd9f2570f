use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hankel::{extended_observability, toeplitz};
use crate::linalg::left_null_space;
use crate::sslib::ControllerModel;

const NULL_SPACE_TOL: f64 = 1e-12;

/// Left annihilator of the controller's future-window relation.
///
/// `Γ⊥` holds orthonormal rows spanning the left null space of
/// `Γ_{L_f}(A_c, C_c)`; `Θ_c = Γ⊥ [I  H^c]`. Every exact closed-loop window
/// satisfies `Θ_c col(u_f, y_f) = Γ⊥ H^c r_f`.
#[derive(Debug, Clone)]
pub struct Annihilator {
    pub gamma_perp: DMatrix<f64>,
    /// `H^c = T_{L_f}(A_c, B_c, C_c, D_c)`
    pub h_c: DMatrix<f64>,
    pub theta: DMatrix<f64>,
}

pub fn annihilator(ctrl: &ControllerModel, lf: usize) -> Result<Annihilator> {
    let m = ctrl.outputs();
    if lf * m <= ctrl.n() {
        return Err(Error::InvalidArgument(format!(
            "L_f * m = {} must exceed the controller order {}",
            lf * m,
            ctrl.n()
        )));
    }
    let gamma = extended_observability(ctrl.a(), ctrl.c(), lf);
    let gamma_perp = left_null_space(&gamma, NULL_SPACE_TOL);
    let h_c = toeplitz(ctrl.a(), ctrl.b(), ctrl.c(), ctrl.d(), lf);
    let mut block = DMatrix::zeros(m * lf, m * lf + h_c.ncols());
    block.columns_mut(0, m * lf).fill_with_identity();
    block.columns_mut(m * lf, h_c.ncols()).copy_from(&h_c);
    let theta = &gamma_perp * block;
    Ok(Annihilator {
        gamma_perp,
        h_c,
        theta,
    })
}

/// `||Θ_c col(u_f, ŷ_f)||_2`.
pub fn restriction_residual(theta: &DMatrix<f64>, u_f: &DVector<f64>, y_f: &DVector<f64>) -> Result<f64> {
    if u_f.len() + y_f.len() != theta.ncols() {
        return Err(Error::dim(format!(
            "Θ_c has {} columns, got {} + {}",
            theta.ncols(),
            u_f.len(),
            y_f.len()
        )));
    }
    let (a, b) = (theta.columns(0, u_f.len()), theta.columns(u_f.len(), y_f.len()));
    Ok((a * u_f + b * y_f).norm())
}
