//! Block-Hankel data matrices, structured system operators and the
//! input/output data equation.
//!
//! Conventions: signals are `d x T` matrices (one column per sample); the
//! past-data stack `Z_p` holds the inputs above the outputs; extended
//! controllability matrices place the oldest sample leftmost.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vstack;
use crate::schema;
use crate::sslib::{StateSpaceModel, Trajectory};

/// Block Hankel matrix of depth `depth`: column `j` is
/// `col(x(j), ..., x(j + depth - 1))`.
pub fn hankel(signal: &DMatrix<f64>, depth: usize) -> Result<DMatrix<f64>> {
    let (d, len) = signal.shape();
    if depth == 0 || depth > len {
        return Err(Error::InsufficientData(format!(
            "hankel depth {depth} not in 1..={len}"
        )));
    }
    let cols = len - depth + 1;
    let mut h = DMatrix::zeros(d * depth, cols);
    for j in 0..cols {
        for i in 0..depth {
            h.view_mut((i * d, j), (d, 1)).copy_from(&signal.column(j + i));
        }
    }
    Ok(h)
}

/// Offline data matrices for past horizon `lp` and future horizon `lf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HankelBundle {
    pub lp: usize,
    pub lf: usize,
    #[serde(with = "schema::matrix")]
    pub u_p: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub y_p: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub z_p: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub u_f: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub y_f: DMatrix<f64>,
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub r_f: Option<DMatrix<f64>>,
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub e_f: Option<DMatrix<f64>>,
}

impl HankelBundle {
    /// Number of columns `N - L_p - L_f + 1`.
    pub fn columns(&self) -> usize {
        self.z_p.ncols()
    }

    pub fn m(&self) -> usize {
        self.u_p.nrows() / self.lp
    }

    pub fn p(&self) -> usize {
        self.y_p.nrows() / self.lp
    }

    /// `col(Z_p, U_f)`, the regressor of the multi-step predictor.
    pub fn regressor(&self) -> DMatrix<f64> {
        vstack(&[&self.z_p, &self.u_f]).expect("bundle blocks share column count")
    }

    pub fn r_f(&self) -> Result<&DMatrix<f64>> {
        self.r_f
            .as_ref()
            .ok_or_else(|| Error::MissingBlock("R_f (bundle built from open-loop data)".into()))
    }

    /// Keep only the given columns (in the given order) of every block.
    pub fn select_columns(&self, cols: &[usize]) -> HankelBundle {
        let pick = |m: &DMatrix<f64>| m.select_columns(cols);
        HankelBundle {
            lp: self.lp,
            lf: self.lf,
            u_p: pick(&self.u_p),
            y_p: pick(&self.y_p),
            z_p: pick(&self.z_p),
            u_f: pick(&self.u_f),
            y_f: pick(&self.y_f),
            r_f: self.r_f.as_ref().map(pick),
            e_f: self.e_f.as_ref().map(pick),
        }
    }
}

/// Split a trajectory into past/future Hankel blocks. `R_f` and `E_f` are
/// filled when the trajectory carries `r` and `e`.
pub fn build_bundle(traj: &Trajectory, lp: usize, lf: usize) -> Result<HankelBundle> {
    let n = traj.len();
    if lp == 0 || lf == 0 {
        return Err(Error::InvalidArgument("horizons must be positive".into()));
    }
    if n < lp + lf {
        return Err(Error::InsufficientData(format!(
            "trajectory of length {n} shorter than L_p + L_f = {}",
            lp + lf
        )));
    }
    let past = |s: &DMatrix<f64>| hankel(&s.columns(0, n - lf).into_owned(), lp);
    let future = |s: &DMatrix<f64>| hankel(&s.columns(lp, n - lp).into_owned(), lf);
    let u_p = past(&traj.u)?;
    let y_p = past(&traj.y)?;
    let z_p = vstack(&[&u_p, &y_p])?;
    Ok(HankelBundle {
        lp,
        lf,
        u_f: future(&traj.u)?,
        y_f: future(&traj.y)?,
        r_f: traj.r.as_ref().map(future).transpose()?,
        e_f: traj.e.as_ref().map(future).transpose()?,
        u_p,
        y_p,
        z_p,
    })
}

/// `Γ_s(A, C)`: row block `i` is `C A^i`.
pub fn extended_observability(a: &DMatrix<f64>, c: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let p = c.nrows();
    let mut out = DMatrix::zeros(p * s, a.ncols());
    let mut blk = c.clone();
    for i in 0..s {
        out.view_mut((i * p, 0), blk.shape()).copy_from(&blk);
        blk = &blk * a;
    }
    out
}

/// `Δ_s(A, B)` with block `i` (1-based) equal to `A^{s-i} B`, so that
/// `Δ_s col(w(t-s), ..., w(t-1))` is the state contribution at time `t`.
pub fn extended_controllability(a: &DMatrix<f64>, b: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let m = b.ncols();
    let mut out = DMatrix::zeros(a.nrows(), m * s);
    let mut blk = b.clone();
    for i in (0..s).rev() {
        out.view_mut((0, i * m), blk.shape()).copy_from(&blk);
        blk = a * &blk;
    }
    out
}

/// Lower block-triangular Toeplitz matrix of Markov parameters:
/// `D` on the diagonal and `C A^{i-j-1} B` below it.
pub fn toeplitz(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    s: usize,
) -> DMatrix<f64> {
    let (p, m) = d.shape();
    let mut markov = Vec::with_capacity(s);
    markov.push(d.clone());
    let mut ab = b.clone();
    for _ in 1..s {
        markov.push(c * &ab);
        ab = a * ab;
    }
    let mut out = DMatrix::zeros(p * s, m * s);
    for i in 0..s {
        for j in 0..=i {
            out.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
        }
    }
    out
}

/// Relative residual of the predictor-form data equation
/// `||Y_f - Γ Δ Z_p - H^u U_f - H^e E_f||_F / ||Y_f||_F`, where `Δ` is built
/// from `A_K = A - K C`. What remains is the `A_K^{L_p}` truncation term.
pub fn data_equation_residual(model: &StateSpaceModel, bundle: &HankelBundle) -> Result<f64> {
    let (lp, lf) = (bundle.lp, bundle.lf);
    if bundle.m() != model.m() || bundle.p() != model.p() {
        return Err(Error::dim("bundle and model channel counts differ"));
    }
    let e_f = bundle
        .e_f
        .as_ref()
        .ok_or_else(|| Error::MissingBlock("E_f is required for the data equation".into()))?;
    let k = model.k_or_zero();
    let a_k = model.a_k();
    let delta_u = extended_controllability(&a_k, &(model.b() - &k * model.d()), lp);
    let delta_y = extended_controllability(&a_k, &k, lp);
    let mut delta = DMatrix::zeros(model.n(), delta_u.ncols() + delta_y.ncols());
    delta.columns_mut(0, delta_u.ncols()).copy_from(&delta_u);
    delta
        .columns_mut(delta_u.ncols(), delta_y.ncols())
        .copy_from(&delta_y);
    let gamma = extended_observability(model.a(), model.c(), lf);
    let h_u = toeplitz(model.a(), model.b(), model.c(), model.d(), lf);
    let eye_p = DMatrix::identity(model.p(), model.p());
    let h_e = toeplitz(model.a(), &k, model.c(), &eye_p, lf);
    let resid = &bundle.y_f - gamma * delta * &bundle.z_p - h_u * &bundle.u_f - h_e * e_f;
    Ok(resid.norm() / bundle.y_f.norm().max(f64::MIN_POSITIVE))
}

/// Past window `z_p = col(u_{[t-L_p, t-1]}, y_{[t-L_p, t-1]})` at 1-based time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineWindow {
    pub z_p: DVector<f64>,
    pub t: usize,
}

pub fn online_window(traj: &Trajectory, t: usize, lp: usize) -> Result<OnlineWindow> {
    if t <= lp || t > traj.len() + 1 {
        return Err(Error::InsufficientData(format!(
            "online window at t = {t} needs L_p = {lp} past samples within a length-{} record",
            traj.len()
        )));
    }
    let start = t - 1 - lp;
    Ok(OnlineWindow {
        z_p: stack_window(
            &traj.u.columns(start, lp).into_owned(),
            &traj.y.columns(start, lp).into_owned(),
        ),
        t,
    })
}

/// Stack the columns of an input window over those of an output window.
pub fn stack_window(u: &DMatrix<f64>, y: &DMatrix<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(u.len() + y.len());
    z.rows_mut(0, u.len()).copy_from_slice(u.as_slice());
    z.rows_mut(u.len(), y.len()).copy_from_slice(y.as_slice());
    z
}
