//! Offline closed-loop data collection with a content-addressed cache.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, NoiseLevel};
use super::seeds::{derive_seed, fingerprint};
use super::snr::{calibrate_snr, measure_snr};
use crate::error::{Error, Result};
use crate::hankel::{build_bundle, HankelBundle};
use crate::schema::SCHEMA_VERSION;
use crate::sslib::{gaussian_noise, simulate_closed_loop, ControllerModel, StateSpaceModel, Trajectory, NOISE_GENERATOR};

/// Resolved noise of one campaign cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSetting {
    pub sigma: f64,
    /// Analytic SNR of the offline experiment at `sigma` (absent if `σ = 0`).
    pub snr_db: Option<f64>,
    /// Target SNR when the level was given in dB.
    pub target_snr_db: Option<f64>,
}

/// Everything one replicate's offline experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u32,
    /// Content hash of the recipe that produced the data.
    pub fingerprint: String,
    pub replicate: usize,
    pub offline_seed: u64,
    pub noise: NoiseSetting,
    /// Plant with the innovation gain used for the simulation.
    pub plant: StateSpaceModel,
    pub trajectory: Trajectory,
    pub bundle: HankelBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    Disabled,
}

/// Inputs that determine the offline data, hashed for the cache key.
#[derive(Serialize)]
struct Recipe<'a> {
    plant: &'a StateSpaceModel,
    controller: &'a ControllerModel,
    qw_scale: f64,
    collection: &'a super::config::CollectionSpec,
    lp: usize,
    lf: usize,
    noise: &'a NoiseLevel,
    base_seed: u64,
    replicate: usize,
    generator: &'static str,
    schema_version: u32,
}

fn recipe_fingerprint(cfg: &ExperimentConfig, level: &NoiseLevel, replicate: usize) -> Result<String> {
    let plant = cfg.plant()?;
    let controller = cfg.controller()?;
    fingerprint(&Recipe {
        plant: &plant,
        controller: &controller,
        qw_scale: cfg.qw_scale,
        collection: &cfg.collection,
        lp: cfg.task.lp,
        lf: cfg.task.lf,
        noise: level,
        base_seed: cfg.base_seed,
        replicate,
        generator: NOISE_GENERATOR,
        schema_version: SCHEMA_VERSION,
    })
}

/// Resolve a noise level into `σ`, calibrating against the collection
/// reference of `replicate` when a target SNR is given.
pub fn resolve_noise(cfg: &ExperimentConfig, level: &NoiseLevel, replicate: usize) -> Result<NoiseSetting> {
    let plant = cfg.plant()?;
    let ctrl = cfg.controller()?;
    let reference = cfg
        .collection
        .reference_signal(derive_seed(cfg.base_seed, replicate, "reference"))?;
    match *level {
        NoiseLevel::Snr { snr_db } => {
            let cal = calibrate_snr(&plant, &ctrl, &reference, snr_db, cfg.qw_scale)?;
            Ok(NoiseSetting {
                sigma: cal.sigma,
                snr_db: Some(cal.snr_db),
                target_snr_db: Some(snr_db),
            })
        }
        NoiseLevel::Sigma { sigma } => {
            let snr_db = if sigma > 0.0 {
                Some(measure_snr(&plant, &ctrl, &reference, sigma, cfg.qw_scale)?)
            } else {
                None
            };
            Ok(NoiseSetting {
                sigma,
                snr_db,
                target_snr_db: None,
            })
        }
    }
}

/// Simulate the offline closed-loop experiment of one replicate.
pub fn collect_dataset(cfg: &ExperimentConfig, level: &NoiseLevel, replicate: usize) -> Result<Dataset> {
    let noise = resolve_noise(cfg, level, replicate)?;
    let plant = cfg.plant_with_gain(noise.sigma)?;
    let ctrl = cfg.controller()?;
    let reference = cfg
        .collection
        .reference_signal(derive_seed(cfg.base_seed, replicate, "reference"))?;
    let offline_seed = derive_seed(cfg.base_seed, replicate, "offline");
    let e = gaussian_noise(offline_seed, &vec![noise.sigma; plant.p()], cfg.collection.n)?;
    let trajectory = simulate_closed_loop(
        &plant,
        &ctrl,
        &reference,
        &e,
        &DVector::zeros(plant.n()),
        &DVector::zeros(ctrl.n()),
    )?;
    let bundle = build_bundle(&trajectory, cfg.task.lp, cfg.task.lf)?;
    Ok(Dataset {
        schema_version: SCHEMA_VERSION,
        fingerprint: recipe_fingerprint(cfg, level, replicate)?,
        replicate,
        offline_seed,
        noise,
        plant,
        trajectory,
        bundle,
    })
}

/// Directory of cached datasets, one `dataset_<fingerprint>.json` each.
#[derive(Debug, Clone)]
pub struct DatasetCache {
    dir: PathBuf,
}

impl DatasetCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DatasetCache { dir })
    }

    pub fn path(&self, fp: &str) -> PathBuf {
        self.dir.join(format!("dataset_{fp}.json"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cached dataset of the recipe, or a fresh simulation that is then
    /// stored. An entry whose recorded fingerprint disagrees with its key is
    /// recomputed.
    pub fn get_or_collect(
        &self,
        cfg: &ExperimentConfig,
        level: &NoiseLevel,
        replicate: usize,
    ) -> Result<(Dataset, CacheStatus)> {
        let fp = recipe_fingerprint(cfg, level, replicate)?;
        let path = self.path(&fp);
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<Dataset>(&text) {
                Ok(ds) if ds.fingerprint == fp && ds.schema_version == SCHEMA_VERSION => {
                    return Ok((ds, CacheStatus::Hit))
                }
                _ => log::warn!("discarding stale cache entry {}", path.display()),
            }
        }
        let ds = collect_dataset(cfg, level, replicate)?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string(&ds)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok((ds, CacheStatus::Miss))
    }
}

/// Collect through an optional cache.
pub fn load_or_collect(
    cache: Option<&DatasetCache>,
    cfg: &ExperimentConfig,
    level: &NoiseLevel,
    replicate: usize,
) -> Result<(Dataset, CacheStatus)> {
    match cache {
        Some(c) => c.get_or_collect(cfg, level, replicate),
        None => Ok((collect_dataset(cfg, level, replicate)?, CacheStatus::Disabled)),
    }
}

impl Dataset {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ds: Dataset = serde_json::from_str(&text)?;
        if ds.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                format!("dataset schema_version {} unsupported", ds.schema_version),
                vec!["schema_version".into()],
            ));
        }
        Ok(ds)
    }
}
