use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::plan::Planner;
use super::task::{cost_index, ControlTask};
use super::variant::OnlinePolicy;
use crate::error::{Error, Result};
use crate::hankel::stack_window;
use crate::schema;
use crate::sslib::{ControllerModel, LoopStepper, StateSpaceModel};

/// Per-sample log of one receding-horizon experiment.
///
/// Samples `t = 1 - L_p, ..., 0` are the warmup under the loop controller;
/// `t = 1, ..., N_c` are the online steps that enter `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub t: Vec<i64>,
    #[serde(with = "schema::matrix")]
    pub u: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub y: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    pub r: DMatrix<f64>,
    /// Optimal plan objective (NaN outside the predictive phase).
    pub plan_cost: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Cost index over the online steps (NaN if the run failed).
    pub j: f64,
    pub failure: Option<String>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Column range of the online samples.
    pub fn online_columns(&self) -> std::ops::Range<usize> {
        let start = self.t.iter().position(|&t| t >= 1).unwrap_or(self.t.len());
        start..self.t.len()
    }

    /// Recompute `J` with per-sample weights.
    pub fn cost(&self, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
        let cols = self.online_columns();
        let n = cols.len();
        cost_index(
            &self.u.columns(cols.start, n).into_owned(),
            &self.y.columns(cols.start, n).into_owned(),
            &self.r.columns(cols.start, n).into_owned(),
            q,
            r,
        )
    }

    /// CSV with one row per sample: `t, u*, y*, r*, plan_cost, iterations`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.u.nrows()).map(|i| format!("u{i}")));
        header.extend((0..self.y.nrows()).map(|i| format!("y{i}")));
        header.extend((0..self.r.nrows()).map(|i| format!("r{i}")));
        header.push("plan_cost".into());
        header.push("iterations".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.t[k].to_string()];
            row.extend(self.u.column(k).iter().map(|v| fmt_f64(*v)));
            row.extend(self.y.column(k).iter().map(|v| fmt_f64(*v)));
            row.extend(self.r.column(k).iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(self.plan_cost[k]));
            row.push(self.iterations[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

/// Run one closed-loop predictive-control experiment.
///
/// The plant starts at rest. The first `L_p` samples run under the loop
/// controller with zero reference, which fills the past window and the
/// oracle's filter. Then, for `t = 1..N_c`, the policy plans over `L_f`
/// samples and only the first input is applied. `noise` holds the innovations
/// of all `L_p + N_c` samples. A failing step stops the run; the trace keeps
/// every completed sample and records the error.
pub fn receding_horizon_run(
    plant: &StateSpaceModel,
    policy: &mut OnlinePolicy,
    task: &ControlTask,
    noise: &DMatrix<f64>,
    warmup: &ControllerModel,
    label: &str,
) -> Result<RunTrace> {
    let (m, p) = (plant.m(), plant.p());
    task.validate(m, p)?;
    let (lp, n_c) = (task.lp, task.n_c);
    let total = lp + n_c;
    if noise.shape() != (p, total) {
        return Err(Error::dim(format!(
            "noise is {:?}, expected {p}x{total} (warmup + online samples)",
            noise.shape()
        )));
    }
    let stepper = LoopStepper::new(plant, warmup)?;
    let reference = task.reference_signal()?;
    let k_gain = plant.k_or_zero();

    let mut x = DVector::zeros(plant.n());
    let mut xc = DVector::zeros(warmup.n());
    let mut u = DMatrix::zeros(m, total);
    let mut y = DMatrix::zeros(p, total);
    let mut r = DMatrix::zeros(p, total);
    r.columns_mut(lp, n_c).copy_from(&reference.columns(0, n_c));
    let mut plan_cost = vec![f64::NAN; total];
    let mut iterations = vec![0usize; total];
    let mut failure = None;
    let mut done = 0;

    for k in 0..total {
        let e = noise.column(k).into_owned();
        let rk = r.column(k).into_owned();
        let step = |planner: &mut dyn Planner| -> Result<(DVector<f64>, f64, usize)> {
            let z_p = stack_window(
                &u.columns(k - lp, lp).into_owned(),
                &y.columns(k - lp, lp).into_owned(),
            );
            let y_r = task.reference_window(&reference, k - lp + 1)?;
            let plan = planner.plan(&z_p, &y_r)?;
            Ok((plan.first_input(m), plan.cost, plan.iterations))
        };
        let (uk, yk) = match (k < lp, &mut *policy) {
            (true, _) | (false, OnlinePolicy::Loop) => stepper.step(plant, warmup, &mut x, &mut xc, &rk, &e),
            (false, OnlinePolicy::Predictive(planner)) => match step(planner.as_mut()) {
                Ok((uk, cost, its)) => {
                    plan_cost[k] = cost;
                    iterations[k] = its;
                    let yk = plant.c() * &x + plant.d() * &uk + &e;
                    x = plant.a() * &x + plant.b() * &uk + &k_gain * &e;
                    (uk, yk)
                }
                Err(err) => {
                    let err = Error::Controller {
                        variant: label.to_string(),
                        step: k + 1 - lp,
                        source: Box::new(err),
                    };
                    log::warn!("{err}");
                    failure = Some(err.to_string());
                    break;
                }
            },
        };
        if let OnlinePolicy::Predictive(planner) = policy {
            planner.observe(&uk, &yk);
        }
        u.set_column(k, &uk);
        y.set_column(k, &yk);
        done = k + 1;
    }

    let t: Vec<i64> = (0..done).map(|k| k as i64 + 1 - lp as i64).collect();
    let mut trace = RunTrace {
        t,
        u: u.columns(0, done).into_owned(),
        y: y.columns(0, done).into_owned(),
        r: r.columns(0, done).into_owned(),
        plan_cost: plan_cost[..done].to_vec(),
        iterations: iterations[..done].to_vec(),
        j: f64::NAN,
        failure,
    };
    if !trace.failed() {
        trace.j = trace.cost(&task.q_sample(), &task.r_sample())?;
    }
    Ok(trace)
}
