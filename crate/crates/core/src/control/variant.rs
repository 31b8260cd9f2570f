use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::plan::{OraclePlanner, Planner, PredictorPlanner};
use super::rddpc::{RddpcL1Planner, RddpcPlanner, ReducedBasis, RegNorm};
use super::task::ControlTask;
use crate::error::{Error, Result};
use crate::hankel::HankelBundle;
use crate::iv::{build_iv, lcf, CoprimeFactors, InstrumentSet, IvVariant};
use crate::sslib::{ControllerModel, StateSpaceModel};

/// Controller strategies compared in the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerVariant {
    /// MPC on the true model with a steady-state Kalman filter.
    Oracle,
    /// Least-squares predictor (open-loop instrument).
    Spc,
    /// Weighted least-squares predictor with `col(Z_p, Ξ_f, R_f)`.
    DdpcIv,
    /// ... with `col(Z_p, R_f)`.
    DdpcIv1,
    /// ... with `col(Z_p, Ξ_f)`.
    DdpcIv2,
    RddpcIv {
        lambda: f64,
        #[serde(default)]
        norm: RegNorm,
    },
    /// Keep the existing loop controller.
    LoopBaseline,
}

impl ControllerVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerVariant::Oracle => "oracle",
            ControllerVariant::Spc => "spc",
            ControllerVariant::DdpcIv => "ddpc_iv",
            ControllerVariant::DdpcIv1 => "ddpc_iv1",
            ControllerVariant::DdpcIv2 => "ddpc_iv2",
            ControllerVariant::RddpcIv { .. } => "rddpc_iv",
            ControllerVariant::LoopBaseline => "loop_baseline",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            ControllerVariant::RddpcIv { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }

    /// Instrument the variant is built on, if it is data driven.
    pub fn iv_variant(&self) -> Option<IvVariant> {
        match self {
            ControllerVariant::Spc => Some(IvVariant::OpenLoop),
            ControllerVariant::DdpcIv | ControllerVariant::RddpcIv { .. } => Some(IvVariant::Combined),
            ControllerVariant::DdpcIv1 => Some(IvVariant::RefOnly),
            ControllerVariant::DdpcIv2 => Some(IvVariant::LcfOnly),
            ControllerVariant::Oracle | ControllerVariant::LoopBaseline => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ControllerVariant::RddpcIv { lambda, .. } = self {
            if !(*lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidArgument(format!("λ = {lambda} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Offline data of one experiment with the instruments and reduced bases
/// derived from it, computed on first use.
pub struct OfflineContext {
    pub bundle: HankelBundle,
    pub controller: ControllerModel,
    pub factors: CoprimeFactors,
    instruments: HashMap<IvVariant, InstrumentSet>,
    reduced: HashMap<IvVariant, ReducedBasis>,
}

impl OfflineContext {
    pub fn new(bundle: HankelBundle, controller: ControllerModel) -> Result<Self> {
        let factors = lcf(&controller)?;
        Ok(OfflineContext {
            bundle,
            controller,
            factors,
            instruments: HashMap::new(),
            reduced: HashMap::new(),
        })
    }

    /// Instrument set with `Ω*` attached.
    pub fn instrument(&mut self, variant: IvVariant) -> Result<&InstrumentSet> {
        if !self.instruments.contains_key(&variant) {
            let mut iv = build_iv(&self.bundle, variant, Some(&self.factors))?;
            iv.attach_predictor(&self.bundle)?;
            self.instruments.insert(variant, iv);
        }
        Ok(&self.instruments[&variant])
    }

    pub fn reduced_basis(&mut self, variant: IvVariant) -> Result<&ReducedBasis> {
        if !self.reduced.contains_key(&variant) {
            self.instrument(variant)?;
            let rb = ReducedBasis::new(&self.bundle, &self.instruments[&variant])?;
            self.reduced.insert(variant, rb);
        }
        Ok(&self.reduced[&variant])
    }
}

/// What drives the plant after the warmup.
pub enum OnlinePolicy {
    Predictive(Box<dyn Planner>),
    /// The loop controller stays in charge.
    Loop,
}

/// Prepare the online policy of `variant`. Data-driven variants need an
/// offline context; the oracle needs the plant with its Kalman gain.
pub fn build_policy(
    variant: &ControllerVariant,
    plant: &StateSpaceModel,
    offline: Option<&mut OfflineContext>,
    task: &ControlTask,
) -> Result<OnlinePolicy> {
    variant.validate()?;
    task.validate(plant.m(), plant.p())?;
    match variant {
        ControllerVariant::LoopBaseline => Ok(OnlinePolicy::Loop),
        ControllerVariant::Oracle => Ok(OnlinePolicy::Predictive(Box::new(OraclePlanner::new(plant, task)?))),
        _ => {
            let ctx = offline.ok_or_else(|| {
                Error::MissingBlock(format!("{} needs offline closed-loop data", variant.label()))
            })?;
            if ctx.bundle.lp != task.lp || ctx.bundle.lf != task.lf {
                return Err(Error::dim(format!(
                    "offline data has horizons ({}, {}), task has ({}, {})",
                    ctx.bundle.lp, ctx.bundle.lf, task.lp, task.lf
                )));
            }
            let ivv = variant.iv_variant().expect("data-driven variant");
            let planner: Box<dyn Planner> = match *variant {
                ControllerVariant::RddpcIv {
                    lambda,
                    norm: RegNorm::SquaredTwo,
                } => Box::new(RddpcPlanner::new(ctx.reduced_basis(ivv)?, task, lambda)?),
                ControllerVariant::RddpcIv { lambda, norm: RegNorm::One } => {
                    ctx.instrument(ivv)?;
                    Box::new(RddpcL1Planner::new(&ctx.bundle, &ctx.instruments[&ivv], task, lambda)?)
                }
                _ => Box::new(PredictorPlanner::new(ctx.instrument(ivv)?, task)?),
            };
            Ok(OnlinePolicy::Predictive(planner))
        }
    }
}
