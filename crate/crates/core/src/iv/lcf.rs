use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{extended_observability, toeplitz, HankelBundle};
use crate::linalg::spectral_radius;
use crate::sslib::{stabilizing_output_injection, ControllerModel, StateSpaceModel};

/// Left coprime factors `C(z) = V_c(z)^{-1} U_c(z)` of a loop controller,
/// so that `V_c u = U_c (r - y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoprimeFactors {
    /// Denominator factor, input `u`.
    pub v: StateSpaceModel,
    /// Numerator factor, input `r - y`.
    pub u: StateSpaceModel,
    /// Output injection used for the factorization.
    #[serde(with = "crate::schema::matrix")]
    pub l_c: DMatrix<f64>,
}

/// Observer-form left coprime factorization with `L_c` from
/// [`stabilizing_output_injection`]:
/// `V_c = (A_c + L_c C_c, L_c, C_c, I)` and
/// `U_c = (A_c + L_c C_c, B_c + L_c D_c, C_c, D_c)`.
pub fn lcf(ctrl: &ControllerModel) -> Result<CoprimeFactors> {
    let l_c = stabilizing_output_injection(ctrl.a(), ctrl.c())?;
    let a_l = ctrl.a() + &l_c * ctrl.c();
    let rho = spectral_radius(&a_l);
    if rho >= 1.0 {
        return Err(Error::NotDetectable(format!(
            "A_c + L_c C_c has spectral radius {rho}"
        )));
    }
    let m = ctrl.outputs();
    let v = StateSpaceModel::new(a_l.clone(), l_c.clone(), ctrl.c().clone(), DMatrix::identity(m, m))?;
    let u = StateSpaceModel::new(
        a_l,
        ctrl.b() + &l_c * ctrl.d(),
        ctrl.c().clone(),
        ctrl.d().clone(),
    )?;
    Ok(CoprimeFactors { v, u, l_c })
}

impl CoprimeFactors {
    /// Realization of `V_c^{-1} U_c` (series of the inverted denominator and
    /// the numerator).
    pub fn reconstruct(&self) -> Result<StateSpaceModel> {
        let dv_inv = self
            .v
            .d()
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("D_v is singular".into()))?;
        // V^{-1} = (A_v - B_v Dv^{-1} C_v, B_v Dv^{-1}, -Dv^{-1} C_v, Dv^{-1})
        let ai = self.v.a() - self.v.b() * &dv_inv * self.v.c();
        let bi = self.v.b() * &dv_inv;
        let ci = -&dv_inv * self.v.c();
        let di = dv_inv;
        // series: w -> U -> V^{-1}
        let (nu, ni) = (self.u.n(), ai.nrows());
        let mut a = DMatrix::zeros(nu + ni, nu + ni);
        a.view_mut((0, 0), (nu, nu)).copy_from(self.u.a());
        a.view_mut((nu, 0), (ni, nu)).copy_from(&(&bi * self.u.c()));
        a.view_mut((nu, nu), (ni, ni)).copy_from(&ai);
        let mut b = DMatrix::zeros(nu + ni, self.u.m());
        b.rows_mut(0, nu).copy_from(self.u.b());
        b.rows_mut(nu, ni).copy_from(&(&bi * self.u.d()));
        let mut c = DMatrix::zeros(di.nrows(), nu + ni);
        c.columns_mut(0, nu).copy_from(&(&di * self.u.c()));
        c.columns_mut(nu, ni).copy_from(&ci);
        let d = &di * self.u.d();
        StateSpaceModel::new(a, b, c, d)
    }
}

/// Markov parameters `D, C B, C A B, ...` (first `count` of them).
pub fn markov_parameters(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    count: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(d.clone());
    let mut ab = b.clone();
    for _ in 1..count {
        out.push(c * &ab);
        ab = a * ab;
    }
    out
}

/// `Ξ_f = H^{c,v} U_f + H^{c,u} Y_f`, the controller-based instrument.
///
/// Equals `Γ^u X^u_f - Γ^v X^v_f + H^{c,u} R_f`, which carries no future
/// innovations.
pub fn xi_f(factors: &CoprimeFactors, bundle: &HankelBundle) -> Result<DMatrix<f64>> {
    let lf = bundle.lf;
    let (v, u) = (&factors.v, &factors.u);
    if v.m() != bundle.m() || u.m() != bundle.p() {
        return Err(Error::dim("coprime factors do not match bundle channels"));
    }
    let h_v = toeplitz(v.a(), v.b(), v.c(), v.d(), lf);
    let h_u = toeplitz(u.a(), u.b(), u.c(), u.d(), lf);
    Ok(h_v * &bundle.u_f + h_u * &bundle.y_f)
}

/// Observability matrices `(Γ^v, Γ^u)` of the factors at depth `lf`.
pub fn factor_observability(factors: &CoprimeFactors, lf: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        extended_observability(factors.v.a(), factors.v.c(), lf),
        extended_observability(factors.u.a(), factors.u.c(), lf),
    )
}
