use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{ControllerModel, StateSpaceModel};
use crate::error::{Error, Result};
use crate::schema;

/// Input/output record of an experiment. Each signal stores one column per
/// sample; `r` is absent for open-loop data and `e` when the innovations are
/// unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "schema::matrix")]
    pub u: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub y: DMatrix<f64>,
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub r: Option<DMatrix<f64>>,
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub e: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn new(
        u: DMatrix<f64>,
        y: DMatrix<f64>,
        r: Option<DMatrix<f64>>,
        e: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = u.ncols();
        let lens = [Some(y.ncols()), r.as_ref().map(|r| r.ncols()), e.as_ref().map(|e| e.ncols())];
        if lens.iter().flatten().any(|&l| l != n) {
            return Err(Error::dim("trajectory signals have different lengths"));
        }
        if let Some(r) = &r {
            if r.nrows() != y.nrows() {
                return Err(Error::dim("reference and output channel counts differ"));
            }
        }
        if let Some(e) = &e {
            if e.nrows() != y.nrows() {
                return Err(Error::dim("innovation and output channel counts differ"));
            }
        }
        Ok(Trajectory { u, y, r, e })
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }
}

fn check_signal(name: &str, s: &DMatrix<f64>, rows: usize, len: usize) -> Result<()> {
    if s.nrows() != rows || s.ncols() != len {
        return Err(Error::dim(format!(
            "{name} is {:?}, expected {:?}",
            s.shape(),
            (rows, len)
        )));
    }
    Ok(())
}

/// Open-loop simulation of the innovation-form plant from state `x0`.
pub fn simulate_open_loop(
    model: &StateSpaceModel,
    u: &DMatrix<f64>,
    e: &DMatrix<f64>,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    let len = u.ncols();
    check_signal("u", u, model.m(), len)?;
    check_signal("e", e, model.p(), len)?;
    if x0.len() != model.n() {
        return Err(Error::dim("x0 length differs from state dimension"));
    }
    let k = model.k_or_zero();
    let mut x = x0.clone();
    let mut y = DMatrix::zeros(model.p(), len);
    for t in 0..len {
        let ut = u.column(t);
        let et = e.column(t);
        let yt = model.c() * &x + model.d() * ut + et;
        y.set_column(t, &yt);
        x = model.a() * &x + model.b() * ut + &k * et;
    }
    Trajectory::new(u.clone(), y, None, Some(e.clone()))
}

/// One step of the plant/controller interconnection with the algebraic
/// loop resolved exactly.
pub(crate) struct LoopStepper {
    /// `(I + D_c D)^{-1}`
    loop_inv: DMatrix<f64>,
    k: DMatrix<f64>,
}

impl LoopStepper {
    pub(crate) fn new(model: &StateSpaceModel, ctrl: &ControllerModel) -> Result<Self> {
        ctrl.check_compatible(model)?;
        let m = model.m();
        let loop_mat = DMatrix::identity(m, m) + ctrl.d() * model.d();
        let loop_inv = loop_mat.try_inverse().ok_or(Error::IllPosedLoop)?;
        if loop_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::IllPosedLoop);
        }
        Ok(LoopStepper {
            loop_inv,
            k: model.k_or_zero(),
        })
    }

    /// Advances `x`, `xc` in place and returns `(u, y)`.
    pub(crate) fn step(
        &self,
        model: &StateSpaceModel,
        ctrl: &ControllerModel,
        x: &mut DVector<f64>,
        xc: &mut DVector<f64>,
        r: &DVector<f64>,
        e: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        // u = C_c xc + D_c (r - C x - D u - e)  =>  (I + D_c D) u = C_c xc + D_c (r - C x - e)
        let free_err = r - model.c() * &*x - e;
        let u = &self.loop_inv * (ctrl.c() * &*xc + ctrl.d() * &free_err);
        let y = model.c() * &*x + model.d() * &u + e;
        let err = r - &y;
        *x = model.a() * &*x + model.b() * &u + &self.k * e;
        *xc = ctrl.a() * &*xc + ctrl.b() * err;
        (u, y)
    }
}

/// Closed-loop simulation of plant and controller from states `(x0, xc0)`.
pub fn simulate_closed_loop(
    model: &StateSpaceModel,
    ctrl: &ControllerModel,
    r: &DMatrix<f64>,
    e: &DMatrix<f64>,
    x0: &DVector<f64>,
    xc0: &DVector<f64>,
) -> Result<Trajectory> {
    let len = r.ncols();
    let stepper = LoopStepper::new(model, ctrl)?;
    check_signal("r", r, model.p(), len)?;
    check_signal("e", e, model.p(), len)?;
    if x0.len() != model.n() || xc0.len() != ctrl.n() {
        return Err(Error::dim("initial state length mismatch"));
    }
    let mut x = x0.clone();
    let mut xc = xc0.clone();
    let mut u = DMatrix::zeros(model.m(), len);
    let mut y = DMatrix::zeros(model.p(), len);
    for t in 0..len {
        let (ut, yt) = stepper.step(
            model,
            ctrl,
            &mut x,
            &mut xc,
            &r.column(t).into_owned(),
            &e.column(t).into_owned(),
        );
        u.set_column(t, &ut);
        y.set_column(t, &yt);
    }
    Trajectory::new(u, y, Some(r.clone()), Some(e.clone()))
}

/// State-space realization of the plant/controller loop with state
/// `col(x, x_c)`, inputs `r` and `e`, and outputs `y` and `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    pub b_e: DMatrix<f64>,
    pub c_y: DMatrix<f64>,
    pub d_yr: DMatrix<f64>,
    pub d_ye: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    pub d_ur: DMatrix<f64>,
    pub d_ue: DMatrix<f64>,
}

/// Eliminate the algebraic loop `u = (I + D_c D)^{-1} [C_c x_c + D_c (r - C x - e)]`.
pub fn closed_loop(model: &StateSpaceModel, ctrl: &ControllerModel) -> Result<ClosedLoop> {
    let stepper = LoopStepper::new(model, ctrl)?;
    let l = &stepper.loop_inv;
    let (n, nc) = (model.n(), ctrl.n());
    // u = c_u [x; xc] + d_ur r + d_ue e
    let mut c_u = DMatrix::zeros(model.m(), n + nc);
    c_u.columns_mut(0, n).copy_from(&(-(l * ctrl.d() * model.c())));
    c_u.columns_mut(n, nc).copy_from(&(l * ctrl.c()));
    let d_ur = l * ctrl.d();
    let d_ue = -&d_ur;
    // y = C x + D u + e
    let mut c_y = model.d() * &c_u;
    c_y.columns_mut(0, n).add_assign(model.c());
    let d_yr = model.d() * &d_ur;
    let d_ye = model.d() * &d_ue + DMatrix::identity(model.p(), model.p());
    let mut a = DMatrix::zeros(n + nc, n + nc);
    a.rows_mut(0, n).copy_from(&(model.b() * &c_u));
    a.view_mut((0, 0), (n, n)).add_assign(model.a());
    a.rows_mut(n, nc).copy_from(&(-(ctrl.b() * &c_y)));
    a.view_mut((n, n), (nc, nc)).add_assign(ctrl.a());
    let mut b_r = DMatrix::zeros(n + nc, model.p());
    b_r.rows_mut(0, n).copy_from(&(model.b() * &d_ur));
    b_r.rows_mut(n, nc).copy_from(&(ctrl.b() * (DMatrix::identity(model.p(), model.p()) - &d_yr)));
    let mut b_e = DMatrix::zeros(n + nc, model.p());
    b_e.rows_mut(0, n).copy_from(&(model.b() * &d_ue + stepper.k));
    b_e.rows_mut(n, nc).copy_from(&(-(ctrl.b() * &d_ye)));
    Ok(ClosedLoop {
        a,
        b_r,
        b_e,
        c_y,
        d_yr,
        d_ye,
        c_u,
        d_ur,
        d_ue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceModel {
        let s = |v| DMatrix::from_element(1, 1, v);
        StateSpaceModel::new(s(a), s(b), s(c), s(d)).unwrap()
    }

    #[test]
    fn delay_chain() {
        let m = scalar(0.5, 1.0, 1.0, 0.0);
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let e = DMatrix::zeros(1, 2);
        let tr = simulate_open_loop(&m, &u, &e, &DVector::zeros(1)).unwrap();
        assert_eq!(tr.y.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn mismatched_signal_rejected() {
        let m = scalar(0.5, 1.0, 1.0, 0.0);
        let u = DMatrix::zeros(1, 3);
        let e = DMatrix::zeros(1, 2);
        assert!(simulate_open_loop(&m, &u, &e, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn singular_loop_rejected() {
        let m = scalar(0.5, 1.0, 1.0, 1.0);
        let s = |v| DMatrix::from_element(1, 1, v);
        let c = ControllerModel::new(s(0.0), s(0.0), s(0.0), s(-1.0)).unwrap();
        let r = DMatrix::zeros(1, 3);
        let res = simulate_closed_loop(&m, &c, &r, &r, &DVector::zeros(1), &DVector::zeros(1));
        assert!(matches!(res, Err(Error::IllPosedLoop)));
    }

    #[test]
    fn zero_equilibrium() {
        let m = scalar(0.5, 1.0, 1.0, 0.0);
        let s = |v| DMatrix::from_element(1, 1, v);
        let c = ControllerModel::new(s(0.3), s(1.0), s(1.0), s(0.0)).unwrap();
        let r = DMatrix::zeros(1, 20);
        let tr = simulate_closed_loop(&m, &c, &r, &r, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!(tr.u.iter().chain(tr.y.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn realization_matches_stepper() {
        let s = |v| DMatrix::from_element(1, 1, v);
        let m = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.7, -0.1, 0.2, 0.9]),
            DMatrix::from_row_slice(2, 1, &[0.1, 0.05]),
            DMatrix::from_row_slice(1, 2, &[0.3, 1.2]),
            s(0.8),
        )
        .unwrap()
        .with_kalman_gain(DMatrix::from_row_slice(2, 1, &[0.2, -0.1]))
        .unwrap();
        let c = ControllerModel::new(s(0.9), s(0.4), s(0.7), s(-0.2)).unwrap();
        let cl = closed_loop(&m, &c).unwrap();
        let len = 12;
        let r = DMatrix::from_fn(1, len, |_, t| (t as f64 * 0.7).sin());
        let e = DMatrix::from_fn(1, len, |_, t| (t as f64 * 1.3).cos() * 0.1);
        let tr = simulate_closed_loop(&m, &c, &r, &e, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
        let mut z = DVector::zeros(3);
        for t in 0..len {
            let (rt, et) = (r.column(t), e.column(t));
            let y = &cl.c_y * &z + &cl.d_yr * rt + &cl.d_ye * et;
            let u = &cl.c_u * &z + &cl.d_ur * rt + &cl.d_ue * et;
            assert!((y[0] - tr.y[(0, t)]).abs() < 1e-12);
            assert!((u[0] - tr.u[(0, t)]).abs() < 1e-12);
            z = &cl.a * &z + &cl.b_r * rt + &cl.b_e * et;
        }
    }
}
