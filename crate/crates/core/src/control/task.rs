use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::horizon_diag;
use crate::qp::SolverSettings;
use crate::sslib::square_wave;

/// Reference program of one output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelReference {
    /// `offset ± amplitude`, high for the first `duty * period` samples.
    Square {
        period: usize,
        #[serde(default = "half")]
        duty: f64,
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        phase: usize,
    },
    Constant { value: f64 },
}

fn half() -> f64 {
    0.5
}

impl ChannelReference {
    pub fn generate(&self, length: usize) -> Result<Vec<f64>> {
        match *self {
            ChannelReference::Square {
                period,
                duty,
                amplitude,
                offset,
                phase,
            } => Ok(square_wave(period, duty, amplitude, length, phase)?
                .into_iter()
                .map(|v| v + offset)
                .collect()),
            ChannelReference::Constant { value } => Ok(vec![value; length]),
        }
    }
}

/// Finite per-channel bounds, replicated over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Tracking task solved online by every predictive controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlTask {
    pub lp: usize,
    pub lf: usize,
    /// Number of online predictive steps.
    pub n_c: usize,
    /// One entry per output channel.
    pub reference: Vec<ChannelReference>,
    /// Per-sample diagonal output weight (length `p`).
    pub q: Vec<f64>,
    /// Per-sample diagonal input weight (length `m`).
    pub r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_box: Option<ChannelBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_box: Option<ChannelBox>,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl ControlTask {
    /// Square-wave tracking with period 60 and unit amplitude on a SISO
    /// plant, `L_p = L_f = 30`, `N_c = 60`, `Q = 1`, `R = 0.01`.
    pub fn siso_square_tracking() -> Self {
        ControlTask {
            lp: 30,
            lf: 30,
            n_c: 60,
            reference: vec![ChannelReference::Square {
                period: 60,
                duty: 0.5,
                amplitude: 1.0,
                offset: 0.0,
                phase: 0,
            }],
            q: vec![1.0],
            r: vec![0.01],
            u_box: None,
            y_box: None,
            solver: SolverSettings::default(),
        }
    }

    pub fn p(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Check the task against plant dimensions.
    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        if self.lp == 0 || self.lf == 0 || self.n_c == 0 {
            return Err(Error::InvalidArgument("L_p, L_f and N_c must be positive".into()));
        }
        if self.q.len() != p || self.reference.len() != p {
            return Err(Error::dim(format!(
                "task has {} output weights and {} reference channels, plant has {p} outputs",
                self.q.len(),
                self.reference.len()
            )));
        }
        if self.r.len() != m {
            return Err(Error::dim(format!("task has {} input weights, plant has {m} inputs", self.r.len())));
        }
        if self.q.iter().chain(self.r.iter()).any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("Q and R must be positive definite".into()));
        }
        for (name, bx, dim) in [("u_box", &self.u_box, m), ("y_box", &self.y_box, p)] {
            if let Some(b) = bx {
                if b.lower.len() != dim || b.upper.len() != dim {
                    return Err(Error::dim(format!("{name} must have {dim} channels")));
                }
                if b.lower.iter().zip(&b.upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
                    return Err(Error::InvalidArgument(format!("{name} has lower > upper")));
                }
            }
        }
        self.solver.validate()
    }

    pub fn has_boxes(&self) -> bool {
        self.u_box.is_some() || self.y_box.is_some()
    }

    /// `Q` over the horizon, `(p L_f) x (p L_f)`.
    pub fn q_horizon(&self) -> DMatrix<f64> {
        horizon_diag(&self.q, self.lf)
    }

    pub fn r_horizon(&self) -> DMatrix<f64> {
        horizon_diag(&self.r, self.lf)
    }

    pub fn q_sample(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.q))
    }

    pub fn r_sample(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.r))
    }

    /// Reference samples `r(1), ..., r(N_c + L_f - 1)` as a `p x len` matrix.
    pub fn reference_signal(&self) -> Result<DMatrix<f64>> {
        let len = self.n_c + self.lf - 1;
        let mut out = DMatrix::zeros(self.reference.len(), len);
        for (ch, spec) in self.reference.iter().enumerate() {
            let v = spec.generate(len)?;
            out.row_mut(ch).copy_from_slice(&v);
        }
        Ok(out)
    }

    /// `y^r_f = col(r(t), ..., r(t + L_f - 1))` for 1-based `t`.
    pub fn reference_window(&self, signal: &DMatrix<f64>, t: usize) -> Result<DVector<f64>> {
        if t == 0 || t + self.lf - 1 > signal.ncols() {
            return Err(Error::dim(format!("reference window at t = {t} exceeds the signal")));
        }
        Ok(DVector::from_column_slice(signal.columns(t - 1, self.lf).into_owned().as_slice()))
    }

    /// Horizon bounds `(lb, ub)` on `u_f` (infinite when unbounded).
    pub fn u_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        replicate(&self.u_box, self.m(), self.lf)
    }

    pub fn y_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        replicate(&self.y_box, self.p(), self.lf)
    }
}

fn replicate(bx: &Option<ChannelBox>, dim: usize, horizon: usize) -> (DVector<f64>, DVector<f64>) {
    match bx {
        None => (
            DVector::from_element(dim * horizon, f64::NEG_INFINITY),
            DVector::from_element(dim * horizon, f64::INFINITY),
        ),
        Some(b) => (
            DVector::from_fn(dim * horizon, |i, _| b.lower[i % dim]),
            DVector::from_fn(dim * horizon, |i, _| b.upper[i % dim]),
        ),
    }
}

/// `J = Σ_t ||y(t) - r(t)||²_Q + ||u(t)||²_R` over the columns of the
/// signals (one per sample) with per-sample weights `q` (`p x p`) and `r`
/// (`m x m`).
pub fn cost_index(
    u: &DMatrix<f64>,
    y: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    let n = u.ncols();
    if y.ncols() != n || reference.ncols() != n {
        return Err(Error::dim(format!(
            "cost index: u has {n} samples, y {}, r {}",
            y.ncols(),
            reference.ncols()
        )));
    }
    if y.nrows() != reference.nrows() || q.shape() != (y.nrows(), y.nrows()) || r.shape() != (u.nrows(), u.nrows()) {
        return Err(Error::dim("cost index: weight or channel dimensions differ"));
    }
    let mut j = 0.0;
    for t in 0..n {
        let err = y.column(t) - reference.column(t);
        let ut = u.column(t);
        j += err.dot(&(q * &err)) + ut.dot(&(r * ut));
    }
    Ok(j)
}
