//! Experiment configuration (JSON, versioned by `schema_version`).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::seeds::{derive_seed, fingerprint};
use crate::control::{ControlTask, ControllerVariant, RegNorm, MAX_L1_COLUMNS};
use crate::error::{Error, Result};
use crate::schema::SCHEMA_VERSION;
use crate::sslib::{benchmarks, gaussian_noise, square_wave, ControllerModel, StateSpaceModel, NOISE_GENERATOR};

/// A model given by built-in name, by JSON file or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec<T> {
    Builtin(String),
    File(PathBuf),
    Inline(T),
}

/// Excitation program of one reference channel during data collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationChannel {
    /// One square-wave period per amplitude, repeated up to the record length.
    SquareSeries {
        period: usize,
        duty: f64,
        amplitudes: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// Zero-mean white Gaussian reference.
    WhiteNoise { std: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionSpec {
    /// Record length `N`.
    pub n: usize,
    /// One program per output channel.
    pub reference: Vec<ExcitationChannel>,
}

impl CollectionSpec {
    /// Reference of the offline experiment (`p x N`); `seed` drives the
    /// white-noise channels.
    pub fn reference_signal(&self, seed: u64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.reference.len(), self.n);
        for (ch, spec) in self.reference.iter().enumerate() {
            let row: Vec<f64> = match spec {
                ExcitationChannel::SquareSeries {
                    period,
                    duty,
                    amplitudes,
                    offset,
                } => {
                    if amplitudes.is_empty() {
                        return Err(Error::InvalidArgument("empty amplitude list".into()));
                    }
                    let mut block = Vec::with_capacity(period * amplitudes.len());
                    for a in amplitudes {
                        block.extend(square_wave(*period, *duty, *a, *period, 0)?);
                    }
                    (0..self.n).map(|i| block[i % block.len()] + offset).collect()
                }
                ExcitationChannel::WhiteNoise { std } => {
                    let s = derive_seed(seed, ch, "excitation");
                    gaussian_noise(s, &[*std], self.n)?.row(0).iter().copied().collect()
                }
                ExcitationChannel::Constant { value } => vec![*value; self.n],
            };
            out.row_mut(ch).copy_from_slice(&row);
        }
        Ok(out)
    }
}

/// Noise level of a campaign, as a target SNR or a fixed innovation std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum NoiseLevel {
    Snr { snr_db: f64 },
    Sigma { sigma: f64 },
}

impl NoiseLevel {
    pub fn snr_db(&self) -> Option<f64> {
        match self {
            NoiseLevel::Snr { snr_db } => Some(*snr_db),
            NoiseLevel::Sigma { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Oracle,
    Spc,
    DdpcIv,
    DdpcIv1,
    DdpcIv2,
    RddpcIv,
    LoopBaseline,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Write per-step traces of every run.
    pub traces: bool,
}

fn default_qw_scale() -> f64 {
    benchmarks::DEFAULT_QW_SCALE
}

fn default_replicates() -> usize {
    50
}

/// Floor on `Rv` when synthesizing the Kalman gain of a noise-free setup.
pub const RV_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub plant: ModelSpec<StateSpaceModel>,
    pub controller: ModelSpec<ControllerModel>,
    /// `Qw = qw_scale * I` for the innovation gain; `Rv = σ_e² I`.
    #[serde(default = "default_qw_scale")]
    pub qw_scale: f64,
    pub collection: CollectionSpec,
    pub task: ControlTask,
    pub variants: Vec<VariantKind>,
    /// Regularization weights of `rddpc_iv`.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub norm: RegNorm,
    pub noise: Vec<NoiseLevel>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

/// `10^(-3 + 0.5 k)`, `k = 0..16`: 17 points in `[1e-3, 1e5]`.
pub fn lambda_grid() -> Vec<f64> {
    (0..17).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect()
}

fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.inner().to_string();
        let mut key = if path == "." { String::new() } else { path };
        for marker in ["missing field `", "unknown field `"] {
            if let Some(rest) = inner.split(marker).nth(1) {
                let field = rest.split('`').next().unwrap_or_default();
                key = if key.is_empty() { field.to_string() } else { format!("{key}.{field}") };
            }
        }
        Error::config(format!("{what}: {inner}"), vec![if key.is_empty() { "<root>".into() } else { key }])
    })
}

/// Set `dotted.path[.index]` in a JSON document; `raw` is parsed as JSON
/// and falls back to a string.
pub fn apply_override(doc: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let bad = || Error::config(format!("cannot set `{path}`"), vec![path.to_string()]);
        cur = match cur {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()))
            }
            serde_json::Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| bad())?;
                let slot = items.get_mut(idx).ok_or_else(bad)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad()),
        };
    }
    Err(Error::config("empty override path", vec![path.to_string()]))
}

fn resolve<T: DeserializeOwned + Clone>(
    spec: &ModelSpec<T>,
    base_dir: &Path,
    key: &str,
    builtin: impl Fn(&str) -> Option<T>,
) -> Result<T> {
    match spec {
        ModelSpec::Inline(m) => Ok(m.clone()),
        ModelSpec::Builtin(name) => builtin(name)
            .ok_or_else(|| Error::config(format!("unknown built-in model `{name}`"), vec![key.to_string()])),
        ModelSpec::File(path) => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| {
                Error::config(format!("cannot read {}: {e}", full.display()), vec![key.to_string()])
            })?;
            parse_json(&text, &format!("{key} file {}", full.display()))
        }
    }
}

pub fn builtin_plant(name: &str) -> Option<StateSpaceModel> {
    match name {
        "siso" => Some(benchmarks::siso_plant()),
        "surrogate_2x2" => Some(benchmarks::surrogate_2x2_plant()),
        _ => None,
    }
}

pub fn builtin_controller(name: &str) -> Option<ControllerModel> {
    match name {
        "siso" => Some(benchmarks::siso_controller()),
        "mimo" => Some(benchmarks::mimo_controller()),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Parse and validate; model files are resolved relative to `base_dir`
    /// and inlined.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: serde_json::Value = parse_json(text, "config")?;
        Self::from_value(doc, base_dir)
    }

    pub fn from_value(doc: serde_json::Value, base_dir: &Path) -> Result<Self> {
        match doc.get("schema_version") {
            None => return Err(Error::config("missing schema_version", vec!["schema_version".into()])),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
                return Err(Error::config(
                    format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
                    vec!["schema_version".into()],
                ))
            }
            _ => {}
        }
        let text = doc.to_string();
        let cfg: ExperimentConfig = parse_json(&text, "config")?;
        let resolved = cfg.resolved(base_dir)?;
        resolved.validate()?;
        Ok(resolved)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display()), vec!["--config".into()]))?;
        let mut doc: serde_json::Value = parse_json(&text, "config")?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        Self::from_value(doc, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolved(&self, base_dir: &Path) -> Result<Self> {
        let mut out = self.clone();
        out.plant = ModelSpec::Inline(resolve(&self.plant, base_dir, "plant", builtin_plant)?.without_kalman_gain());
        out.controller = ModelSpec::Inline(resolve(&self.controller, base_dir, "controller", builtin_controller)?);
        Ok(out)
    }

    /// Plant without innovation gain.
    pub fn plant(&self) -> Result<StateSpaceModel> {
        match &self.plant {
            ModelSpec::Inline(m) => Ok(m.clone()),
            ModelSpec::Builtin(name) => builtin_plant(name)
                .ok_or_else(|| Error::config(format!("unknown built-in plant `{name}`"), vec!["plant".into()])),
            ModelSpec::File(_) => Err(Error::config("plant file not resolved", vec!["plant".into()])),
        }
    }

    pub fn controller(&self) -> Result<ControllerModel> {
        match &self.controller {
            ModelSpec::Inline(m) => Ok(m.clone()),
            ModelSpec::Builtin(name) => builtin_controller(name).ok_or_else(|| {
                Error::config(format!("unknown built-in controller `{name}`"), vec!["controller".into()])
            }),
            ModelSpec::File(_) => Err(Error::config("controller file not resolved", vec!["controller".into()])),
        }
    }

    /// Plant with the innovation gain for noise std `sigma`.
    pub fn plant_with_gain(&self, sigma: f64) -> Result<StateSpaceModel> {
        benchmarks::with_innovation_gain(self.plant()?, self.qw_scale, (sigma * sigma).max(RV_FLOOR))
    }

    /// All controller variants, `rddpc_iv` expanded over the λ list.
    pub fn expanded_variants(&self) -> Vec<ControllerVariant> {
        let mut out = Vec::new();
        for kind in &self.variants {
            match kind {
                VariantKind::Oracle => out.push(ControllerVariant::Oracle),
                VariantKind::Spc => out.push(ControllerVariant::Spc),
                VariantKind::DdpcIv => out.push(ControllerVariant::DdpcIv),
                VariantKind::DdpcIv1 => out.push(ControllerVariant::DdpcIv1),
                VariantKind::DdpcIv2 => out.push(ControllerVariant::DdpcIv2),
                VariantKind::LoopBaseline => out.push(ControllerVariant::LoopBaseline),
                VariantKind::RddpcIv => out.extend(self.lambdas.iter().map(|&lambda| ControllerVariant::RddpcIv {
                    lambda,
                    norm: self.norm,
                })),
            }
        }
        out
    }

    /// Number of Hankel columns of the offline data.
    pub fn data_columns(&self) -> usize {
        (self.collection.n + 1).saturating_sub(self.task.lp + self.task.lf)
    }

    /// Check every cross-field constraint; all offending keys are reported.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<(String, String)> = Vec::new();
        let mut flag = |key: &str, msg: String| bad.push((key.to_string(), msg));
        let plant = self.plant();
        let ctrl = self.controller();
        if let (Ok(plant), Ok(ctrl)) = (&plant, &ctrl) {
            let (m, p) = (plant.m(), plant.p());
            if let Err(e) = ctrl.check_compatible(plant) {
                flag("controller", e.to_string());
            }
            if self.task.q.len() != p {
                flag("task.q", format!("needs {p} entries"));
            }
            if self.task.reference.len() != p {
                flag("task.reference", format!("needs {p} channels"));
            }
            if self.task.r.len() != m {
                flag("task.r", format!("needs {m} entries"));
            }
            if self.collection.reference.len() != p {
                flag("collection.reference", format!("needs {p} channels"));
            }
            for (key, v) in [("task.lp", self.task.lp), ("task.lf", self.task.lf), ("task.n_c", self.task.n_c)] {
                if v == 0 {
                    flag(key, "must be positive".into());
                }
            }
            let horizons = self.task.lp > 0 && self.task.lf > 0 && self.task.n_c > 0;
            if horizons && self.task.q.len() == p && self.task.r.len() == m && self.task.reference.len() == p {
                if let Err(e) = self.task.validate(m, p) {
                    flag("task", e.to_string());
                }
            }
            let rows = (m + p) * self.task.lp + m * self.task.lf;
            if self.data_columns() < rows {
                flag(
                    "collection.n",
                    format!("{} Hankel columns cannot identify {rows} regressor rows", self.data_columns()),
                );
            }
            if self.norm == RegNorm::One && self.variants.contains(&VariantKind::RddpcIv) && self.data_columns() > MAX_L1_COLUMNS {
                flag("norm", format!("the 1-norm regularizer supports at most {MAX_L1_COLUMNS} data columns"));
            }
        }
        if let Err(e) = plant {
            flag("plant", e.to_string());
        }
        if let Err(e) = ctrl {
            flag("controller", e.to_string());
        }
        if !(self.qw_scale > 0.0 && self.qw_scale.is_finite()) {
            flag("qw_scale", "must be positive".into());
        }
        for (i, ch) in self.collection.reference.iter().enumerate() {
            let ok = match ch {
                ExcitationChannel::SquareSeries { period, duty, amplitudes, .. } => {
                    *period >= 2 && *duty > 0.0 && *duty < 1.0 && !amplitudes.is_empty()
                }
                ExcitationChannel::WhiteNoise { std } => *std >= 0.0 && std.is_finite(),
                ExcitationChannel::Constant { value } => value.is_finite(),
            };
            if !ok {
                flag(&format!("collection.reference.{i}"), "invalid excitation parameters".into());
            }
        }
        if self.variants.is_empty() {
            flag("variants", "at least one variant is required".into());
        }
        if self.variants.contains(&VariantKind::RddpcIv) && self.lambdas.is_empty() {
            flag("lambdas", "rddpc_iv needs at least one λ".into());
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            flag("lambdas", "λ must be finite and >= 0".into());
        }
        if self.noise.is_empty() {
            flag("noise", "at least one noise level is required".into());
        }
        for (i, lvl) in self.noise.iter().enumerate() {
            let ok = match lvl {
                NoiseLevel::Snr { snr_db } => snr_db.is_finite(),
                NoiseLevel::Sigma { sigma } => *sigma >= 0.0 && sigma.is_finite(),
            };
            if !ok {
                flag(&format!("noise.{i}"), "SNR must be finite and σ finite and >= 0".into());
            }
        }
        if self.replicates == 0 {
            flag("replicates", "must be at least 1".into());
        }
        if bad.is_empty() {
            return Ok(());
        }
        let message = bad.iter().map(|(k, m)| format!("{k}: {m}")).collect::<Vec<_>>().join("; ");
        let mut keys: Vec<String> = bad.into_iter().map(|(k, _)| k).collect();
        keys.dedup();
        Err(Error::config(message, keys))
    }

    /// Hash of the canonical resolved configuration and the noise generator.
    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(&(self, NOISE_GENERATOR))
    }
}
