use nalgebra::{DMatrix, DVector};

use super::task::ControlTask;
use crate::error::{Error, Result};
use crate::hankel::{extended_observability, toeplitz, HankelBundle};
use crate::iv::InstrumentSet;
use crate::linalg::block_diag;
use crate::qp::{EqualityQpSolver, QpStatus, QpWorkspace, QuadraticProgram};
use crate::sslib::StateSpaceModel;

/// One optimized plan over the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub u_f: DVector<f64>,
    pub y_f: DVector<f64>,
    /// Optimal objective including the constant `y_rᵀ Q y_r` term.
    pub cost: f64,
    /// Solver iterations (0 for the direct path).
    pub iterations: usize,
    /// Auxiliary decision variables (`h` or `g`), if any.
    pub aux: Option<DVector<f64>>,
}

impl Plan {
    /// First input of the plan.
    pub fn first_input(&self, m: usize) -> DVector<f64> {
        self.u_f.rows(0, m).into_owned()
    }
}

/// A predictive controller that can be queried once per sample.
pub trait Planner: Send {
    fn plan(&mut self, z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan>;

    /// Feed back the applied input and measured output of the last sample.
    fn observe(&mut self, _u: &DVector<f64>, _y: &DVector<f64>) {}
}

enum PlanSolver {
    Direct(Box<EqualityQpSolver>),
    Boxed(Box<QpWorkspace>),
}

/// Tracking QP over `x = (aux, u_f, ŷ_f)`:
/// `min ½ auxᵀ P_aux aux + ||ŷ_f - y_r||²_Q + ||u_f||²_R  s.t.  Aeq x = beq`
/// with the task boxes on `u_f`, `ŷ_f`.
pub(crate) struct PlanProblem {
    n_aux: usize,
    mlf: usize,
    plf: usize,
    q_h: DMatrix<f64>,
    q_aux: Option<DVector<f64>>,
    solver: PlanSolver,
}

impl PlanProblem {
    pub(crate) fn new(
        p_aux: &DMatrix<f64>,
        q_aux: Option<&DVector<f64>>,
        aux_bounds: Option<(&DVector<f64>, &DVector<f64>)>,
        aeq: &DMatrix<f64>,
        task: &ControlTask,
    ) -> Result<Self> {
        let n_aux = p_aux.nrows();
        let (mlf, plf) = (task.m() * task.lf, task.p() * task.lf);
        let d = n_aux + mlf + plf;
        if aeq.ncols() != d {
            return Err(Error::dim(format!("plan constraint has {} columns, expected {d}", aeq.ncols())));
        }
        let q_h = task.q_horizon();
        let p = block_diag(&[p_aux, &(task.r_horizon() * 2.0), &(&q_h * 2.0)]);
        if q_aux.is_some_and(|q| q.len() != n_aux) || aux_bounds.is_some_and(|(l, u)| l.len() != n_aux || u.len() != n_aux) {
            return Err(Error::dim("auxiliary cost or bounds have the wrong length"));
        }
        let solver = if task.has_boxes() || aux_bounds.is_some() {
            let (ul, uu) = task.u_bounds();
            let (yl, yu) = task.y_bounds();
            let mut lb = DVector::from_element(d, f64::NEG_INFINITY);
            let mut ub = DVector::from_element(d, f64::INFINITY);
            if let Some((al, au)) = aux_bounds {
                lb.rows_mut(0, n_aux).copy_from(al);
                ub.rows_mut(0, n_aux).copy_from(au);
            }
            lb.rows_mut(n_aux, mlf).copy_from(&ul);
            ub.rows_mut(n_aux, mlf).copy_from(&uu);
            lb.rows_mut(n_aux + mlf, plf).copy_from(&yl);
            ub.rows_mut(n_aux + mlf, plf).copy_from(&yu);
            let qp = QuadraticProgram::new(p, DVector::zeros(d), aeq.clone(), DVector::zeros(aeq.nrows()), lb, ub)?;
            PlanSolver::Boxed(Box::new(QpWorkspace::new(qp, task.solver.clone())?))
        } else {
            PlanSolver::Direct(Box::new(EqualityQpSolver::new(&p, aeq)?))
        };
        Ok(PlanProblem {
            n_aux,
            mlf,
            plf,
            q_h,
            q_aux: q_aux.cloned(),
            solver,
        })
    }

    pub(crate) fn solve(&mut self, beq: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        if y_r.len() != self.plf {
            return Err(Error::dim(format!("y_r has length {}, expected {}", y_r.len(), self.plf)));
        }
        let d = self.n_aux + self.mlf + self.plf;
        let qy = &self.q_h * y_r;
        let mut q = DVector::zeros(d);
        q.rows_mut(self.n_aux + self.mlf, self.plf).copy_from(&(&qy * -2.0));
        if let Some(qa) = &self.q_aux {
            q.rows_mut(0, self.n_aux).copy_from(qa);
        }
        let (x, iterations, objective) = match &mut self.solver {
            PlanSolver::Direct(s) => {
                let x = s.solve(&q, beq)?;
                let obj = 0.5 * x.dot(&(s.hessian() * &x)) + q.dot(&x);
                (x, 0, obj)
            }
            PlanSolver::Boxed(ws) => {
                ws.update_linear(&q, beq)?;
                let sol = ws.solve()?;
                match sol.status {
                    QpStatus::Solved => {}
                    QpStatus::MaxIterations => log::warn!(
                        "plan QP hit the iteration limit (prim {:.2e}, dual {:.2e})",
                        sol.prim_res,
                        sol.dual_res
                    ),
                    QpStatus::PrimalInfeasible => {
                        return Err(Error::QpFailed {
                            status: sol.status,
                            iterations: sol.iterations,
                        })
                    }
                }
                (sol.x, sol.iterations, sol.objective)
            }
        };
        Ok(Plan {
            aux: (self.n_aux > 0).then(|| x.rows(0, self.n_aux).into_owned()),
            u_f: x.rows(self.n_aux, self.mlf).into_owned(),
            y_f: x.rows(self.n_aux + self.mlf, self.plf).into_owned(),
            cost: objective + y_r.dot(&qy),
            iterations,
        })
    }
}

/// Steady-state Kalman predictor state `x̂(t | t-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x_hat: DVector<f64>,
}

impl KalmanState {
    pub fn zeros(n: usize) -> Self {
        KalmanState { x_hat: DVector::zeros(n) }
    }
}

/// `x̂⁺ = A x̂ + B u + K (y - C x̂ - D u)`.
pub fn kalman_update(model: &StateSpaceModel, state: &KalmanState, u: &DVector<f64>, y: &DVector<f64>) -> Result<KalmanState> {
    let k = model
        .k()
        .ok_or_else(|| Error::InvalidArgument("Kalman update needs a model with gain K".into()))?;
    let innov = y - model.c() * &state.x_hat - model.d() * u;
    Ok(KalmanState {
        x_hat: model.a() * &state.x_hat + model.b() * u + k * innov,
    })
}

/// Model-based MPC with a steady-state Kalman filter:
/// `ŷ_f = Γ x̂ + H^u u_f`.
pub struct OraclePlanner {
    model: StateSpaceModel,
    gamma: DMatrix<f64>,
    state: KalmanState,
    problem: PlanProblem,
}

impl OraclePlanner {
    pub fn new(model: &StateSpaceModel, task: &ControlTask) -> Result<Self> {
        if model.k().is_none() {
            return Err(Error::InvalidArgument("the oracle needs the plant's Kalman gain".into()));
        }
        task.validate(model.m(), model.p())?;
        let lf = task.lf;
        let gamma = extended_observability(model.a(), model.c(), lf);
        let h_u = toeplitz(model.a(), model.b(), model.c(), model.d(), lf);
        let problem = PlanProblem::new(&DMatrix::zeros(0, 0), None, None, &output_link(&h_u), task)?;
        Ok(OraclePlanner {
            model: model.clone(),
            gamma,
            state: KalmanState::zeros(model.n()),
            problem,
        })
    }

    pub fn state(&self) -> &KalmanState {
        &self.state
    }
}

impl Planner for OraclePlanner {
    fn plan(&mut self, _z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        let beq = &self.gamma * &self.state.x_hat;
        self.problem.solve(&beq, y_r)
    }

    fn observe(&mut self, u: &DVector<f64>, y: &DVector<f64>) {
        self.state = kalman_update(&self.model, &self.state, u, y).expect("gain checked at construction");
    }
}

/// `[-G  I]`: constraint rows `ŷ_f - G u_f = beq`.
fn output_link(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, mlf) = g.shape();
    let mut aeq = DMatrix::zeros(rows, mlf + rows);
    aeq.columns_mut(0, mlf).copy_from(&(-g));
    aeq.columns_mut(mlf, rows).fill_with_identity();
    aeq
}

/// Controller on a multi-step predictor `ŷ_f = Ω_z z_p + Ω_u u_f` (SPC and
/// the DDPC-IV family in their weighted least-squares form).
pub struct PredictorPlanner {
    omega_z: DMatrix<f64>,
    problem: PlanProblem,
}

impl PredictorPlanner {
    pub fn new(iv: &InstrumentSet, task: &ControlTask) -> Result<Self> {
        let omega = iv.omega()?;
        let plf = task.p() * task.lf;
        let mlf = task.m() * task.lf;
        let zlen = (task.m() + task.p()) * task.lp;
        if omega.shape() != (plf, zlen + mlf) {
            return Err(Error::dim(format!(
                "Ω* is {:?}, task expects {plf}x{}",
                omega.shape(),
                zlen + mlf
            )));
        }
        let omega_z = omega.columns(0, zlen).into_owned();
        let omega_u = omega.columns(zlen, mlf).into_owned();
        let problem = PlanProblem::new(&DMatrix::zeros(0, 0), None, None, &output_link(&omega_u), task)?;
        Ok(PredictorPlanner { omega_z, problem })
    }
}

impl Planner for PredictorPlanner {
    fn plan(&mut self, z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        if z_p.len() != self.omega_z.ncols() {
            return Err(Error::dim(format!("z_p has length {}, expected {}", z_p.len(), self.omega_z.ncols())));
        }
        let beq = &self.omega_z * z_p;
        self.problem.solve(&beq, y_r)
    }
}

/// One-shot weighted least-squares predictive step.
pub fn predictor_step(iv: &InstrumentSet, z_p: &DVector<f64>, y_r: &DVector<f64>, task: &ControlTask) -> Result<Plan> {
    PredictorPlanner::new(iv, task)?.plan(z_p, y_r)
}

/// IV-tightened DDPC with decision variable `h` and `g = Φᵀ h`:
/// `col(Z_p, U_f, Y_f) Φᵀ h = col(z_p, u_f, ŷ_f)`.
pub struct TightenedPlanner {
    n_h: usize,
    zlen: usize,
    problem: PlanProblem,
}

impl TightenedPlanner {
    pub fn new(bundle: &HankelBundle, iv: &InstrumentSet, task: &ControlTask) -> Result<Self> {
        if iv.phi.ncols() != bundle.columns() || bundle.lp != task.lp || bundle.lf != task.lf {
            return Err(Error::dim("instrument, bundle and task horizons disagree"));
        }
        let n_h = iv.rows();
        let pt = iv.phi.transpose();
        let zlen = bundle.z_p.nrows();
        let (mlf, plf) = (bundle.u_f.nrows(), bundle.y_f.nrows());
        let mut aeq = DMatrix::zeros(zlen + mlf + plf, n_h + mlf + plf);
        aeq.view_mut((0, 0), (zlen, n_h)).copy_from(&(&bundle.z_p * &pt));
        aeq.view_mut((zlen, 0), (mlf, n_h)).copy_from(&(&bundle.u_f * &pt));
        aeq.view_mut((zlen + mlf, 0), (plf, n_h)).copy_from(&(&bundle.y_f * &pt));
        aeq.view_mut((zlen, n_h), (mlf + plf, mlf + plf)).fill_with_identity();
        aeq.view_mut((zlen, n_h), (mlf + plf, mlf + plf)).neg_mut();
        let problem = PlanProblem::new(&DMatrix::zeros(n_h, n_h), None, None, &aeq, task)?;
        Ok(TightenedPlanner { n_h, zlen, problem })
    }

    pub fn instrument_rows(&self) -> usize {
        self.n_h
    }
}

impl Planner for TightenedPlanner {
    fn plan(&mut self, z_p: &DVector<f64>, y_r: &DVector<f64>) -> Result<Plan> {
        if z_p.len() != self.zlen {
            return Err(Error::dim(format!("z_p has length {}, expected {}", z_p.len(), self.zlen)));
        }
        let rows = self.zlen + self.problem.mlf + self.problem.plf;
        let mut beq = DVector::zeros(rows);
        beq.rows_mut(0, self.zlen).copy_from(z_p);
        self.problem.solve(&beq, y_r)
    }
}

/// One-shot IV-tightened step.
pub fn tightened_step(
    bundle: &HankelBundle,
    iv: &InstrumentSet,
    z_p: &DVector<f64>,
    y_r: &DVector<f64>,
    task: &ControlTask,
) -> Result<Plan> {
    TightenedPlanner::new(bundle, iv, task)?.plan(z_p, y_r)
}
