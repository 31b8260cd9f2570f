//! Dense convex QP solver (ADMM operator splitting with solution polishing)
//! for problems of the form
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x
//! subject to  Aeq x = beq,   lb <= x <= ub
//! ```
//!
//! Internally the constraints are stacked as `l <= A x <= u` with one row per
//! equality and one row per variable carrying a finite bound. The linear
//! system `P + σI + Aᵀ diag(ρ) A` is Cholesky-factorized once per penalty
//! value and cached in a [`QpWorkspace`], so a receding-horizon controller
//! only pays for the iterations when `q`, `beq` or the bounds change.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, pinv};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        aeq: DMatrix<f64>,
        beq: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self> {
        let d = q.len();
        if p.shape() != (d, d) {
            return Err(Error::dim(format!("P is {:?}, expected {d}x{d}", p.shape())));
        }
        if aeq.ncols() != d || aeq.nrows() != beq.len() {
            return Err(Error::dim("Aeq/beq shapes inconsistent"));
        }
        if lb.len() != d || ub.len() != d {
            return Err(Error::dim("bound vectors have wrong length"));
        }
        if !is_symmetric(&p, 1e-10) {
            return Err(Error::InvalidArgument("P is not symmetric".into()));
        }
        if lb.iter().zip(ub.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidArgument("lb > ub".into()));
        }
        Ok(QuadraticProgram { p, q, aeq, beq, lb, ub })
    }

    /// Problem without any constraint.
    pub fn unconstrained(p: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let d = q.len();
        Self::new(
            p,
            q,
            DMatrix::zeros(0, d),
            DVector::zeros(0),
            DVector::from_element(d, f64::NEG_INFINITY),
            DVector::from_element(d, f64::INFINITY),
        )
    }

    /// Equality-constrained problem with free variables.
    pub fn equality(p: DMatrix<f64>, q: DVector<f64>, aeq: DMatrix<f64>, beq: DVector<f64>) -> Result<Self> {
        let d = q.len();
        Self::new(
            p,
            q,
            aeq,
            beq,
            DVector::from_element(d, f64::NEG_INFINITY),
            DVector::from_element(d, f64::INFINITY),
        )
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    pub fn has_finite_bounds(&self) -> bool {
        self.lb.iter().chain(self.ub.iter()).any(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// ADMM penalty parameter.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub max_iter: usize,
    pub polish: bool,
    pub adaptive_rho: bool,
    /// Residuals are evaluated every `check_every` iterations.
    pub check_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-5,
            max_iter: 20_000,
            polish: true,
            adaptive_rho: true,
            check_every: 10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.sigma > 0.0
            && self.alpha > 0.0
            && self.alpha < 2.0
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0
            && self.eps_prim_inf > 0.0
            && self.max_iter >= 1
            && self.check_every >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    /// Multipliers of the bounds (negative on an active lower bound,
    /// positive on an active upper bound).
    pub y_bound: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub prim_res: f64,
    pub dual_res: f64,
    pub polished: bool,
}

const RHO_EQ_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

/// Reusable solver state for a fixed `P` and `Aeq` (warm starts and the
/// cached factorization survive `update_*` calls).
pub struct QpWorkspace {
    qp: QuadraticProgram,
    settings: SolverSettings,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    /// Variable index of each bound row.
    bound_vars: Vec<usize>,
    is_eq: Vec<bool>,
    rho: f64,
    rho_vec: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

impl QpWorkspace {
    pub fn new(qp: QuadraticProgram, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let d = qp.dim();
        let bound_vars: Vec<usize> = (0..d)
            .filter(|&i| qp.lb[i].is_finite() || qp.ub[i].is_finite())
            .collect();
        let k = qp.aeq.nrows();
        let rows = k + bound_vars.len();
        let mut a = DMatrix::zeros(rows, d);
        a.rows_mut(0, k).copy_from(&qp.aeq);
        for (r, &i) in bound_vars.iter().enumerate() {
            a[(k + r, i)] = 1.0;
        }
        let (l, u) = Self::stack_bounds(&qp, &bound_vars);
        let is_eq: Vec<bool> = (0..rows).map(|i| l[i] == u[i]).collect();
        let rho = settings.rho;
        let rho_vec = Self::rho_vector(rho, &is_eq);
        let chol = Self::factor(&qp.p, &a, &rho_vec, settings.sigma)?;
        Ok(QpWorkspace {
            x: DVector::zeros(d),
            z: DVector::zeros(rows),
            y: DVector::zeros(rows),
            qp,
            settings,
            a,
            l,
            u,
            bound_vars,
            is_eq,
            rho,
            rho_vec,
            chol,
        })
    }

    fn stack_bounds(qp: &QuadraticProgram, bound_vars: &[usize]) -> (DVector<f64>, DVector<f64>) {
        let k = qp.aeq.nrows();
        let rows = k + bound_vars.len();
        let mut l = DVector::zeros(rows);
        let mut u = DVector::zeros(rows);
        l.rows_mut(0, k).copy_from(&qp.beq);
        u.rows_mut(0, k).copy_from(&qp.beq);
        for (r, &i) in bound_vars.iter().enumerate() {
            l[k + r] = qp.lb[i];
            u[k + r] = qp.ub[i];
        }
        (l, u)
    }

    fn rho_vector(rho: f64, is_eq: &[bool]) -> DVector<f64> {
        DVector::from_iterator(
            is_eq.len(),
            is_eq.iter().map(|&e| if e { rho * RHO_EQ_SCALE } else { rho }),
        )
    }

    fn factor(p: &DMatrix<f64>, a: &DMatrix<f64>, rho: &DVector<f64>, sigma: f64) -> Result<Cholesky<f64, Dyn>> {
        let d = p.nrows();
        let mut ra = a.clone();
        for (i, mut row) in ra.row_iter_mut().enumerate() {
            row *= rho[i];
        }
        let kkt = p + DMatrix::identity(d, d) * sigma + a.transpose() * ra;
        Cholesky::new(kkt).ok_or_else(|| Error::InvalidArgument("P is not positive semidefinite".into()))
    }

    pub fn problem(&self) -> &QuadraticProgram {
        &self.qp
    }

    /// Replace the linear cost and equality right-hand side.
    pub fn update_linear(&mut self, q: &DVector<f64>, beq: &DVector<f64>) -> Result<()> {
        if q.len() != self.qp.dim() || beq.len() != self.qp.beq.len() {
            return Err(Error::dim("update_linear: wrong vector lengths"));
        }
        self.qp.q.copy_from(q);
        self.qp.beq.copy_from(beq);
        let k = beq.len();
        self.l.rows_mut(0, k).copy_from(beq);
        self.u.rows_mut(0, k).copy_from(beq);
        Ok(())
    }

    /// Replace finite bounds. The set of bounded variables must not change.
    pub fn update_bounds(&mut self, lb: &DVector<f64>, ub: &DVector<f64>) -> Result<()> {
        let d = self.qp.dim();
        if lb.len() != d || ub.len() != d {
            return Err(Error::dim("update_bounds: wrong vector lengths"));
        }
        for i in 0..d {
            let bounded = lb[i].is_finite() || ub[i].is_finite();
            if bounded != self.bound_vars.contains(&i) {
                return Err(Error::InvalidArgument(
                    "update_bounds cannot change which variables are bounded".into(),
                ));
            }
        }
        self.qp.lb.copy_from(lb);
        self.qp.ub.copy_from(ub);
        let (l, u) = Self::stack_bounds(&self.qp, &self.bound_vars);
        let is_eq: Vec<bool> = (0..l.len()).map(|i| l[i] == u[i]).collect();
        self.l = l;
        self.u = u;
        if is_eq != self.is_eq {
            self.is_eq = is_eq;
            self.set_rho(self.rho)?;
        }
        Ok(())
    }

    fn set_rho(&mut self, rho: f64) -> Result<()> {
        self.rho = rho.clamp(RHO_MIN, RHO_MAX);
        self.rho_vec = Self::rho_vector(self.rho, &self.is_eq);
        self.chol = Self::factor(&self.qp.p, &self.a, &self.rho_vec, self.settings.sigma)?;
        Ok(())
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i].max(self.l[i]).min(self.u[i]))
    }

    fn residuals(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Residuals {
        let ax = &self.a * x;
        let px = &self.qp.p * x;
        let aty = self.a.transpose() * y;
        let prim = (&ax - z).amax();
        let dual = (&px + &self.qp.q + &aty).amax();
        let prim_scale = ax.amax().max(z.amax());
        let dual_scale = px.amax().max(aty.amax()).max(self.qp.q.amax());
        Residuals {
            prim,
            dual,
            eps_prim: self.settings.eps_abs + self.settings.eps_rel * prim_scale,
            eps_dual: self.settings.eps_abs + self.settings.eps_rel * dual_scale,
            prim_scale,
            dual_scale,
        }
    }

    fn primal_infeasible(&self, dy: &DVector<f64>) -> bool {
        let norm = dy.amax();
        if norm <= 1e-12 {
            return false;
        }
        let eps = self.settings.eps_prim_inf * norm;
        if (self.a.transpose() * dy).amax() > eps {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let v = dy[i];
            if v > eps {
                if !self.u[i].is_finite() {
                    return false;
                }
                support += self.u[i] * v;
            } else if v < -eps {
                if !self.l[i].is_finite() {
                    return false;
                }
                support += self.l[i] * v;
            }
        }
        support < -eps
    }

    /// Run ADMM from the current warm start.
    pub fn solve(&mut self) -> Result<QpSolution> {
        let s = self.settings.clone();
        let mut x = self.x.clone();
        let mut z = self.project(&(&self.a * &x));
        let mut y = self.y.clone();
        let mut status = QpStatus::MaxIterations;
        let mut iterations = s.max_iter;
        let mut last = self.residuals(&x, &z, &y);
        for it in 1..=s.max_iter {
            let y_prev = y.clone();
            let rz = z.component_mul(&self.rho_vec) - &y;
            let rhs = &x * s.sigma - &self.qp.q + self.a.transpose() * rz;
            let x_t = self.chol.solve(&rhs);
            let z_t = &self.a * &x_t;
            x = &x_t * s.alpha + &x * (1.0 - s.alpha);
            let z_relaxed = &z_t * s.alpha + &z * (1.0 - s.alpha);
            let z_new = self.project(&(&z_relaxed + y.component_div(&self.rho_vec)));
            y += (&z_relaxed - &z_new).component_mul(&self.rho_vec);
            z = z_new;

            if it % s.check_every == 0 || it == s.max_iter {
                last = self.residuals(&x, &z, &y);
                if last.prim <= last.eps_prim && last.dual <= last.eps_dual {
                    status = QpStatus::Solved;
                    iterations = it;
                    break;
                }
                if self.primal_infeasible(&(&y - &y_prev)) {
                    status = QpStatus::PrimalInfeasible;
                    iterations = it;
                    break;
                }
                if s.adaptive_rho && it % (5 * s.check_every) == 0 {
                    let num = last.prim / last.prim_scale.max(1e-10);
                    let den = last.dual / last.dual_scale.max(1e-10);
                    let new_rho = (self.rho * (num / den.max(1e-20)).sqrt()).clamp(RHO_MIN, RHO_MAX);
                    if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                        self.set_rho(new_rho)?;
                    }
                }
            }
        }

        let mut sol_y = y.clone();
        let mut polished = false;
        if status != QpStatus::PrimalInfeasible && s.polish {
            if let Some((xp, yp)) = self.polish(&z, &y) {
                let zp = self.project(&(&self.a * &xp));
                let rp = self.residuals(&xp, &zp, &yp);
                let good = rp.prim <= last.prim.max(rp.eps_prim) && rp.dual <= last.dual.max(rp.eps_dual);
                if good {
                    x = xp;
                    z = zp;
                    sol_y = yp;
                    last = rp;
                    polished = true;
                    if rp.prim <= rp.eps_prim && rp.dual <= rp.eps_dual {
                        status = QpStatus::Solved;
                    }
                }
            }
        }

        self.x = x.clone();
        self.z = z;
        self.y = if polished { y } else { sol_y.clone() };
        let k = self.qp.aeq.nrows();
        let mut y_bound = DVector::zeros(self.qp.dim());
        for (r, &i) in self.bound_vars.iter().enumerate() {
            y_bound[i] = sol_y[k + r];
        }
        Ok(QpSolution {
            objective: self.qp.objective(&x),
            y_eq: sol_y.rows(0, k).into_owned(),
            y_bound,
            x,
            status,
            iterations,
            prim_res: last.prim,
            dual_res: last.dual,
            polished,
        })
    }

    /// Solve the equality-constrained KKT system on the guessed active set.
    fn polish(&self, z: &DVector<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let d = self.qp.dim();
        let mut active: Vec<(usize, f64)> = Vec::new();
        for i in 0..self.a.nrows() {
            if self.is_eq[i] || (self.l[i].is_finite() && z[i] - self.l[i] < -y[i]) {
                active.push((i, self.l[i]));
            } else if self.u[i].is_finite() && self.u[i] - z[i] < y[i] {
                active.push((i, self.u[i]));
            }
        }
        let na = active.len();
        let mut kkt = DMatrix::zeros(d + na, d + na);
        kkt.view_mut((0, 0), (d, d)).copy_from(&self.qp.p);
        let mut rhs = DVector::zeros(d + na);
        rhs.rows_mut(0, d).copy_from(&(-&self.qp.q));
        for (j, &(row, b)) in active.iter().enumerate() {
            let ar = self.a.row(row);
            kkt.view_mut((d + j, 0), (1, d)).copy_from(&ar);
            kkt.view_mut((0, d + j), (d, 1)).copy_from(&ar.transpose());
            rhs[d + j] = b;
        }
        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let (kp, _) = pinv(&kkt, 1e-12);
                kp * &rhs
            }
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        let xp = sol.rows(0, d).into_owned();
        let mut yp = DVector::zeros(self.a.nrows());
        for (j, &(row, b)) in active.iter().enumerate() {
            let mult = sol[d + j];
            // sign consistency of inequality multipliers
            if !self.is_eq[row] {
                let lower = b == self.l[row];
                if (lower && mult > 1e-9) || (!lower && mult < -1e-9) {
                    return None;
                }
            }
            yp[row] = mult;
        }
        Some((xp, yp))
    }
}

#[derive(Clone, Copy)]
struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    prim_scale: f64,
    dual_scale: f64,
}

/// Solve a QP from scratch.
pub fn solve(qp: &QuadraticProgram, settings: &SolverSettings) -> Result<QpSolution> {
    QpWorkspace::new(qp.clone(), settings.clone())?.solve()
}

/// Direct solver for `min ½xᵀPx + qᵀx  s.t.  Aeq x = beq` (no bounds) by
/// null-space elimination. The factorization depends only on `P` and `Aeq`
/// and is reused across right-hand sides.
#[derive(Debug, Clone)]
pub struct EqualityQpSolver {
    aeq_pinv: DMatrix<f64>,
    aeq: DMatrix<f64>,
    null: DMatrix<f64>,
    p: DMatrix<f64>,
    /// Eigenpairs of the reduced Hessian `Nᵀ P N`.
    h_vecs: DMatrix<f64>,
    h_inv_vals: DVector<f64>,
    h_null: DMatrix<f64>,
}

const REDUCED_HESSIAN_TOL: f64 = 1e-13;

impl EqualityQpSolver {
    pub fn new(p: &DMatrix<f64>, aeq: &DMatrix<f64>) -> Result<Self> {
        let d = p.nrows();
        if !p.is_square() || aeq.ncols() != d {
            return Err(Error::dim("EqualityQpSolver: P/Aeq shape mismatch"));
        }
        let (aeq_pinv, null) = if aeq.nrows() == 0 {
            (DMatrix::zeros(d, 0), DMatrix::identity(d, d))
        } else {
            let (ap, _) = pinv(aeq, 1e-12);
            // null space of Aeq = left null space of Aeqᵀ, as columns
            let null = crate::linalg::left_null_space(&aeq.transpose(), 1e-12).transpose();
            (ap, null)
        };
        let reduced = null.transpose() * p * &null;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = if reduced.nrows() == 0 {
            nalgebra::SymmetricEigen {
                eigenvectors: DMatrix::zeros(0, 0),
                eigenvalues: DVector::zeros(0),
            }
        } else {
            reduced.symmetric_eigen()
        };
        let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let cut = REDUCED_HESSIAN_TOL * max_ev.max(f64::MIN_POSITIVE);
        if eig.eigenvalues.iter().any(|&v| v < -1e-8 * max_ev.max(1.0)) {
            return Err(Error::InvalidArgument("P is not positive semidefinite on the feasible subspace".into()));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > cut)
            .collect();
        let drop: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] <= cut)
            .collect();
        let h_vecs = eig.eigenvectors.select_columns(&keep);
        let h_inv_vals = DVector::from_iterator(keep.len(), keep.iter().map(|&i| 1.0 / eig.eigenvalues[i]));
        let h_null = eig.eigenvectors.select_columns(&drop);
        Ok(EqualityQpSolver {
            aeq_pinv,
            aeq: aeq.clone(),
            null,
            p: p.clone(),
            h_vecs,
            h_inv_vals,
            h_null,
        })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Minimizer for the given linear term and right-hand side (minimum norm
    /// along directions the objective does not see).
    pub fn solve(&self, q: &DVector<f64>, beq: &DVector<f64>) -> Result<DVector<f64>> {
        if q.len() != self.p.nrows() || beq.len() != self.aeq.nrows() {
            return Err(Error::dim("EqualityQpSolver::solve: wrong vector lengths"));
        }
        let mut x0 = &self.aeq_pinv * beq;
        // iterative refinement absorbs the rounding of the SVD-based inverse
        for _ in 0..2 {
            if self.aeq.nrows() > 0 {
                x0 += &self.aeq_pinv * (beq - &self.aeq * &x0);
            }
        }
        // rounding in Aeq x0 grows with the magnitude of the terms being summed
        let scale = 1.0 + beq.amax() + self.aeq.abs().column_sum().amax() * x0.amax();
        if self.aeq.nrows() > 0 && (&self.aeq * &x0 - beq).amax() > 1e-10 * scale {
            return Err(Error::SingularKkt);
        }
        let grad = self.null.transpose() * (&self.p * &x0 + q);
        let flat = self.h_null.transpose() * &grad;
        if flat.amax() > 1e-8 * (1.0 + grad.amax()) {
            // linear term along a zero-curvature direction: unbounded below
            return Err(Error::SingularKkt);
        }
        let coeff = (self.h_vecs.transpose() * &grad).component_mul(&self.h_inv_vals);
        let w = -(&self.h_vecs * coeff);
        let mut x = x0 + &self.null * w;
        if self.aeq.nrows() > 0 {
            x += &self.aeq_pinv * (beq - &self.aeq * &x);
        }
        Ok(x)
    }
}

/// One-shot version of [`EqualityQpSolver`].
pub fn solve_equality_ls(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    aeq: &DMatrix<f64>,
    beq: &DVector<f64>,
) -> Result<DVector<f64>> {
    EqualityQpSolver::new(p, aeq)?.solve(q, beq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lower_bound_active() {
        let qp = QuadraticProgram::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::zeros(1),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, f64::INFINITY),
        )
        .unwrap();
        let sol = solve(&qp, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!(sol.y_bound[0] < 0.0);
    }

    #[test]
    fn unconstrained_identity() {
        let qp = QuadraticProgram::unconstrained(DMatrix::identity(3, 3), DVector::from_element(3, -1.0)).unwrap();
        let sol = solve(&qp, &SolverSettings::default()).unwrap();
        assert!((sol.x - DVector::from_element(3, 1.0)).amax() < 1e-8);
    }

    #[test]
    fn equality_only_point() {
        // min (x-1)^2 s.t. x = 0
        let x = solve_equality_ls(
            &DMatrix::from_element(1, 1, 2.0),
            &DVector::from_element(1, -2.0),
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::zeros(1),
        )
        .unwrap();
        assert!(x[0].abs() < 1e-14);
    }

    #[test]
    fn no_equalities_is_pinv() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let x = solve_equality_ls(&p, &DVector::from_row_slice(&[-4.0, 0.0]), &DMatrix::zeros(0, 2), &DVector::zeros(0)).unwrap();
        assert!((x - DVector::from_row_slice(&[2.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn unbounded_direction_is_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let r = solve_equality_ls(&p, &DVector::from_row_slice(&[0.0, 1.0]), &DMatrix::zeros(0, 2), &DVector::zeros(0));
        assert!(matches!(r, Err(Error::SingularKkt)));
    }

    #[test]
    fn detects_infeasible_box_equality() {
        // x1 + x2 = 3 with both in [0, 1]
        let qp = QuadraticProgram::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 3.0),
            DVector::zeros(2),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let sol = solve(&qp, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn rejects_asymmetric_cost() {
        let r = QuadraticProgram::unconstrained(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            DVector::zeros(2),
        );
        assert!(r.is_err());
    }
}
