//! Benchmark plants and controllers shipped with the toolkit.

use nalgebra::DMatrix;

use super::model::{ControllerModel, StateSpaceModel};
use super::riccati::kalman_gain;
use crate::error::Result;

/// Second-order SISO plant with direct feedthrough (`D = 1`).
#[allow(clippy::approx_constant)] // 1.4142 is the published entry, not √2
pub fn siso_plant() -> StateSpaceModel {
    StateSpaceModel::new(
        DMatrix::from_row_slice(2, 2, &[0.7326, -0.0861, 0.1722, 0.9909]),
        DMatrix::from_row_slice(2, 1, &[0.0609, 0.0064]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.4142]),
        DMatrix::from_element(1, 1, 1.0),
    )
    .expect("siso plant dimensions")
}

/// Two-state SISO loop controller with integral action for [`siso_plant`].
/// The published `A_c(1,2) = -0` entry is zero.
pub fn siso_controller() -> ControllerModel {
    ControllerModel::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0722, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.2609, 0.164]),
        DMatrix::from_row_slice(1, 2, &[0.8, 0.2142]),
        DMatrix::from_element(1, 1, -0.07),
    )
    .expect("siso controller dimensions")
}

/// Four-state 2x2 decentralized PI-type controller (furnace study).
pub fn mimo_controller() -> ControllerModel {
    ControllerModel::new(
        DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        ),
        DMatrix::from_row_slice(4, 2, &[0.0, 0.3260, 0.0, 0.0802, 0.6250, 0.0, 0.2990, 0.0]),
        DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
        DMatrix::zeros(2, 2),
    )
    .expect("mimo controller dimensions")
}

const SURROGATE_JSON: &str = include_str!("../../data/surrogate_2x2.json");

/// Synthetic stable 2x2 plant closed by [`mimo_controller`]. Generated once
/// from a fixed seed by `python/make_surrogate.py`.
pub fn surrogate_2x2_plant() -> StateSpaceModel {
    serde_json::from_str(SURROGATE_JSON).expect("bundled surrogate plant")
}

/// Process-noise scale used when synthesizing the innovation gain.
pub const DEFAULT_QW_SCALE: f64 = 0.01;

/// Attach the steady-state Kalman gain for `Qw = qw_scale * I` and
/// `Rv = rv * I`.
pub fn with_innovation_gain(plant: StateSpaceModel, qw_scale: f64, rv: f64) -> Result<StateSpaceModel> {
    let (n, p) = (plant.n(), plant.p());
    let k = kalman_gain(
        &plant,
        &(DMatrix::identity(n, n) * qw_scale),
        &(DMatrix::identity(p, p) * rv),
    )?;
    plant.without_kalman_gain().with_kalman_gain(k)
}
