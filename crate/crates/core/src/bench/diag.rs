//! Instrument diagnostics on closed-loop data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{tightened_step, ControlTask};
use crate::error::{Error, Result};
use crate::hankel::HankelBundle;
use crate::iv::{annihilator, build_iv, iv_noise_correlation, lcf, IvVariant};
use crate::sslib::ControllerModel;

/// `||E_f Φᵀ||_F` of one instrument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decorrelation {
    pub variant: IvVariant,
    pub rows: usize,
    pub norm: f64,
}

/// Noise correlation of every instrument buildable from `bundle`; the
/// bundle must carry `E_f` (simulated data).
pub fn decorrelation(bundle: &HankelBundle, ctrl: &ControllerModel) -> Result<Vec<Decorrelation>> {
    let e_f = bundle
        .e_f
        .as_ref()
        .ok_or_else(|| Error::MissingBlock("E_f (innovations unknown)".into()))?;
    let factors = lcf(ctrl)?;
    IvVariant::ALL
        .iter()
        .map(|&variant| {
            let iv = build_iv(bundle, variant, Some(&factors))?;
            Ok(Decorrelation {
                variant,
                rows: iv.rows(),
                norm: iv_noise_correlation(e_f, &iv.phi)?,
            })
        })
        .collect()
}

/// Restriction residual `||Θ_c col(u_f, ŷ_f)||` of an IV-tightened plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub variant: IvVariant,
    pub residual: f64,
    pub plan_cost: f64,
}

/// Plan once with the IV-tightened controller for each instrument and
/// measure how far the plan is from the controller's own future-window
/// relation. Plans from instruments correlated with `R_f` inherit that
/// relation; plans from `col(Z_p)` do not.
pub fn restriction(
    bundle: &HankelBundle,
    ctrl: &ControllerModel,
    task: &ControlTask,
    z_p: &DVector<f64>,
    y_r: &DVector<f64>,
    variants: &[IvVariant],
) -> Result<Vec<Restriction>> {
    let ann = annihilator(ctrl, task.lf)?;
    let factors = lcf(ctrl)?;
    variants
        .iter()
        .map(|&variant| {
            let iv = build_iv(bundle, variant, Some(&factors))?;
            let plan = tightened_step(bundle, &iv, z_p, y_r, task)?;
            Ok(Restriction {
                variant,
                residual: crate::iv::restriction_residual(&ann.theta, &plan.u_f, &plan.y_f)?,
                plan_cost: plan.cost,
            })
        })
        .collect()
}

/// Past window of the last `lp` samples of a record.
pub fn last_window(u: &DMatrix<f64>, y: &DMatrix<f64>, lp: usize) -> Result<DVector<f64>> {
    let n = u.ncols();
    if n < lp || y.ncols() != n {
        return Err(Error::InsufficientData(format!("record of {n} samples has no window of {lp}")));
    }
    Ok(crate::hankel::stack_window(
        &u.columns(n - lp, lp).into_owned(),
        &y.columns(n - lp, lp).into_owned(),
    ))
}
