//! Projection-regularized DDPC
//!
//! ```text
//! min_g  J(u_f, ŷ_f) + λ ||(I - Π) g||
//! s.t.   Z_p g = z_p,  U_f g = u_f,  Y_f g = ŷ_f
//! ```
//!
//! For the squared 2-norm the problem is solved exactly in a reduced basis.
//! Let `B` be an orthonormal basis of the span `S` of the rows of
//! `Z_p, U_f, Y_f, Φ`. Any component of `g` orthogonal to `S` leaves the
//! constraints unchanged, is annihilated by `Π` and only adds to the penalty,
//! so the optimum lies in `S`; with `g = B a`,
//! `||(I - Π) g||² = ||(I - Bᵀ Π B) a||²`. The reduced problem has
//! `dim S` variables instead of `N̄`.
//!
//! The 1-norm variant has no such reduction and works on the full `g`; it is
//! limited to small data sets.

use nalgebra::{DMatrix, DVector};

use super::plan::{Plan, PlanProblem, Planner};
use super::task::ControlTask;
use crate::error::{Error, Result};
use crate::hankel::HankelBundle;
use crate::iv::{projection, InstrumentSet};
use serde::{Deserialize, Serialize};

/// Relative singular-value threshold for the row-space basis.
const BASIS_TOL: f64 = 1e-12;

/// Largest `N̄` accepted by the 1-norm formulation.
pub const MAX_L1_COLUMNS: usize = 400;

/// Norm of the regularizer `||(I - Π) g||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegNorm {
    #[default]
    SquaredTwo,
    One,
}

/// Data matrices expressed in an orthonormal basis `B` of the row space.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    /// `B`, `N̄ x k` with orthonormal columns.
    pub basis: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `Bᵀ Π B`
    pub pi: DMatrix<f64>,
}

impl ReducedBasis {
    pub fn new(bundle: &HankelBundle, iv: &InstrumentSet) -> Result<Self> {
        let n = bundle.columns();
        if iv.phi.ncols() != n {
            return Err(Error::dim("instrument and bundle column counts differ"));
        }
        let blocks = [&bundle.z_p, &bundle.u_f, &bundle.y_f, &iv.phi];
        let s: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut stacked = DMatrix::zeros(n, s);
        let mut c0 = 0;
        for b in blocks {
            stacked.columns_mut(c0, b.nrows()).tr_copy_from(b);
            c0 += b.nrows();
        }
        let qr = stacked.qr();
        let q = qr.q();
        let r = qr.r();
        let svd = r.svd(true, false);
        let u_r = svd.u.as_ref().expect("svd u");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > BASIS_TOL * smax)
            .collect();
        let basis = q * u_r.select_columns(&keep);
        let z = &bundle.z_p * &basis;
        let u = &bundle.u_f * &basis;
        let y = &bundle.y_f * &basis;
        let m_pinv = iv.regressor_pinv(bundle)?;
        let mut w = DMatrix::zeros(z.nrows() + u.nrows(), basis.ncols());
        w.rows_mut(0, z.nrows()).copy_from(&z);
        w.rows_mut(z.nrows(), u.nrows()).copy_from(&u);
        let pi = (&iv.phi * &basis).transpose() * m_pinv * w;
        Ok(ReducedBasis { basis, z, u, y, pi })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `(I - Π_B)ᵀ (I - Π_B)`
    pub fn penalty(&self) -> DMatrix<f64> {
        let k = self.dim();
        let d = DMatrix::identity(k, k) - &self.pi;
        let e = d.transpose() * d;
        (&e + e.transpose()) * 0.5
    }
}

/// RDDPC with the squared 2-norm regularizer on a [`ReducedBasis`].
pub struct RddpcPlanner {
    basis: DMatrix<f64>,
    zlen: usize,
    rows: usize,
    problem: PlanProblem,
}

impl RddpcPlanner {
    pub fn new(reduced: &ReducedBasis, task: &ControlTask, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("λ = {lambda} must be finite and >= 0")));
        }
        let k = reduced.dim();
        let (zlen, mlf, plf) = (reduced.z.nrows(), reduced.u.nrows(), reduced.y.nrows());
        if mlf != task.m() * task.lf || plf != task.p() * task.lf || zlen != (task.m() + task.p()) * task.lp {
            return Err(Error::dim("reduced data and task horizons disagree"));
        }
        let rows = zlen + mlf + plf;
        let mut aeq = DMatrix::zeros(rows, k + mlf + plf);
        aeq.view_mut((0, 0), (zlen, k)).copy_from(&reduced.z);
        aeq.view_mut((zlen, 0), (mlf, k)).copy_from(&reduced.u);
        aeq.view_mut((zlen + mlf, 0), (plf, k)).copy_from(&reduced.y);
        aeq.view_mut((zlen, k), (mlf + plf, mlf + plf)).fill_with_identity();
        aeq.view_mut((zlen, k), (mlf + plf, mlf + plf)).neg_mut();
        let p_aux = reduced.penalty() * (2.0 * lambda);
        let problem = PlanProblem::new(&p_aux, None, None, &aeq, task)?;
        Ok(RddpcPlanner {
            basis: reduced.basis.clone(),
            zlen,
            rows,
            problem,
        })
    }
}

impl Planner for RddpcPlanner {
    /// The returned plan carries the full-length `g` in `aux`.
    fn plan(&mut self, z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        if z_p.len() != self.zlen {
            return Err(Error::dim(format!("z_p has length {}, expected {}", z_p.len(), self.zlen)));
        }
        let mut beq = DVector::zeros(self.rows);
        beq.rows_mut(0, self.zlen).copy_from(z_p);
        let mut plan = self.problem.solve(&beq, y_r)?;
        plan.aux = plan.aux.map(|a| &self.basis * a);
        Ok(plan)
    }
}

/// RDDPC with the 1-norm regularizer, over `(g, v⁺, v⁻, u_f, ŷ_f)` with
/// `(I - Π) g = v⁺ - v⁻` and `v± >= 0`.
pub struct RddpcL1Planner {
    n: usize,
    zlen: usize,
    rows: usize,
    problem: PlanProblem,
}

impl RddpcL1Planner {
    pub fn new(bundle: &HankelBundle, iv: &InstrumentSet, task: &ControlTask, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("λ = {lambda} must be finite and >= 0")));
        }
        let n = bundle.columns();
        if n > MAX_L1_COLUMNS {
            return Err(Error::InvalidArgument(format!(
                "1-norm regularizer supports at most {MAX_L1_COLUMNS} data columns, got {n}"
            )));
        }
        let pi = projection(bundle, iv)?;
        let (zlen, mlf, plf) = (bundle.z_p.nrows(), bundle.u_f.nrows(), bundle.y_f.nrows());
        let n_aux = 3 * n;
        let rows = zlen + mlf + plf + n;
        let mut aeq = DMatrix::zeros(rows, n_aux + mlf + plf);
        aeq.view_mut((0, 0), (zlen, n)).copy_from(&bundle.z_p);
        aeq.view_mut((zlen, 0), (mlf, n)).copy_from(&bundle.u_f);
        aeq.view_mut((zlen + mlf, 0), (plf, n)).copy_from(&bundle.y_f);
        aeq.view_mut((zlen, n_aux), (mlf + plf, mlf + plf)).fill_with_identity();
        aeq.view_mut((zlen, n_aux), (mlf + plf, mlf + plf)).neg_mut();
        let r0 = zlen + mlf + plf;
        aeq.view_mut((r0, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) - pi));
        aeq.view_mut((r0, n), (n, n)).fill_with_identity();
        aeq.view_mut((r0, n), (n, n)).neg_mut();
        aeq.view_mut((r0, 2 * n), (n, n)).fill_with_identity();
        let mut q_aux = DVector::zeros(n_aux);
        q_aux.rows_mut(n, 2 * n).fill(lambda);
        let mut lb = DVector::from_element(n_aux, f64::NEG_INFINITY);
        lb.rows_mut(n, 2 * n).fill(0.0);
        let ub = DVector::from_element(n_aux, f64::INFINITY);
        let problem = PlanProblem::new(&DMatrix::zeros(n_aux, n_aux), Some(&q_aux), Some((&lb, &ub)), &aeq, task)?;
        Ok(RddpcL1Planner { n, zlen, rows, problem })
    }
}

impl Planner for RddpcL1Planner {
    fn plan(&mut self, z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        if z_p.len() != self.zlen {
            return Err(Error::dim(format!("z_p has length {}, expected {}", z_p.len(), self.zlen)));
        }
        let mut beq = DVector::zeros(self.rows);
        beq.rows_mut(0, self.zlen).copy_from(z_p);
        let mut plan = self.problem.solve(&beq, y_r)?;
        plan.aux = plan.aux.map(|x| x.rows(0, self.n).into_owned());
        Ok(plan)
    }
}

/// One-shot regularized step; returns the plan with `g` in `aux`.
pub fn rddpc_step(
    bundle: &HankelBundle,
    iv: &InstrumentSet,
    task: &ControlTask,
    z_p: &DVector<f64>,
    y_r: &DVector<f64>,
    lambda: f64,
    norm: RegNorm,
) -> Result<Plan> {
    match norm {
        RegNorm::SquaredTwo => RddpcPlanner::new(&ReducedBasis::new(bundle, iv)?, task, lambda)?.plan(z_p, y_r),
        RegNorm::One => RddpcL1Planner::new(bundle, iv, task, lambda)?.plan(z_p, y_r),
    }
}
