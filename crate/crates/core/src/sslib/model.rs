use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::schema;

/// Discrete-time plant in innovation form:
///
/// ```text
/// x(t+1) = A x(t) + B u(t) + K e(t)
/// y(t)   = C x(t) + D u(t) + e(t)
/// ```
///
/// A missing `K` is treated as zero (noise enters the output only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    k: Option<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    #[serde(with = "schema::matrix")]
    a: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    b: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    c: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    d: DMatrix<f64>,
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    k: Option<DMatrix<f64>>,
}

impl TryFrom<ModelJson> for StateSpaceModel {
    type Error = Error;

    fn try_from(j: ModelJson) -> Result<Self> {
        let m = StateSpaceModel::new(j.a, j.b, j.c, j.d)?;
        match j.k {
            Some(k) => m.with_kalman_gain(k),
            None => Ok(m),
        }
    }
}

impl From<StateSpaceModel> for ModelJson {
    fn from(m: StateSpaceModel) -> Self {
        ModelJson {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
            k: m.k,
        }
    }
}

fn check_quadruple(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::dim(format!("A must be square, got {:?}", a.shape())));
    }
    if b.nrows() != n {
        return Err(Error::dim(format!("B has {} rows, expected {n}", b.nrows())));
    }
    if c.ncols() != n {
        return Err(Error::dim(format!("C has {} cols, expected {n}", c.ncols())));
    }
    if d.shape() != (c.nrows(), b.ncols()) {
        return Err(Error::dim(format!(
            "D is {:?}, expected {:?}",
            d.shape(),
            (c.nrows(), b.ncols())
        )));
    }
    Ok(())
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        check_quadruple(&a, &b, &c, &d)?;
        Ok(StateSpaceModel { a, b, c, d, k: None })
    }

    /// Attach a Kalman gain. Rejects gains for which `A - K C` is not Schur stable.
    pub fn with_kalman_gain(mut self, k: DMatrix<f64>) -> Result<Self> {
        if k.shape() != (self.n(), self.p()) {
            return Err(Error::dim(format!(
                "K is {:?}, expected {:?}",
                k.shape(),
                (self.n(), self.p())
            )));
        }
        let rho = spectral_radius(&(&self.a - &k * &self.c));
        if rho >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "A - K C is not strictly stable (spectral radius {rho})"
            )));
        }
        self.k = Some(k);
        Ok(self)
    }

    pub fn without_kalman_gain(mut self) -> Self {
        self.k = None;
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn k(&self) -> Option<&DMatrix<f64>> {
        self.k.as_ref()
    }

    /// Kalman gain, or zeros when absent.
    pub fn k_or_zero(&self) -> DMatrix<f64> {
        self.k
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.n(), self.p()))
    }

    /// `A_K = A - K C`.
    pub fn a_k(&self) -> DMatrix<f64> {
        &self.a - self.k_or_zero() * &self.c
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
}

/// Feedback controller driven by the tracking error `r - y`:
///
/// ```text
/// x_c(t+1) = A_c x_c(t) + B_c [r(t) - y(t)]
/// u(t)     = C_c x_c(t) + D_c [r(t) - y(t)]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControllerJson", into = "ControllerJson")]
pub struct ControllerModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerJson {
    #[serde(with = "schema::matrix")]
    a: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    b: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    c: DMatrix<f64>,
    #[serde(with = "schema::matrix")]
    d: DMatrix<f64>,
}

impl TryFrom<ControllerJson> for ControllerModel {
    type Error = Error;

    fn try_from(j: ControllerJson) -> Result<Self> {
        ControllerModel::new(j.a, j.b, j.c, j.d)
    }
}

impl From<ControllerModel> for ControllerJson {
    fn from(m: ControllerModel) -> Self {
        ControllerJson {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
        }
    }
}

impl ControllerModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        check_quadruple(&a, &b, &c, &d)?;
        Ok(ControllerModel { a, b, c, d })
    }

    /// Checks that the controller closes the loop around `plant`
    /// (inputs = plant outputs, outputs = plant inputs).
    pub fn check_compatible(&self, plant: &StateSpaceModel) -> Result<()> {
        if self.inputs() != plant.p() || self.outputs() != plant.m() {
            return Err(Error::dim(format!(
                "controller is {}x{} (out x in) but plant needs {}x{}",
                self.outputs(),
                self.inputs(),
                plant.m(),
                plant.p()
            )));
        }
        Ok(())
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Dimension of the error signal (= plant output dimension).
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    /// Dimension of the control signal (= plant input dimension).
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}
