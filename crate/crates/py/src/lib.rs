//! Python bindings. Matrices cross the boundary as row-major nested lists;
//! models, datasets and records as plain dicts in the JSON schema.

use std::path::Path;

use ivddpc::bench::{self, ExperimentConfig, GroupKey, NoiseLevel, RunRecord};
use ivddpc::sslib::{self, ControllerModel, StateSpaceModel};
use ivddpc::Error;
use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(ivddpc_py, ConfigError, PyValueError, "Invalid experiment configuration.");
create_exception!(ivddpc_py, IvddpcError, PyRuntimeError, "Numerical or runtime failure.");

fn to_py_err(err: Error) -> PyErr {
    match &err {
        Error::Config { keys, .. } => ConfigError::new_err((err.to_string(), keys.clone())),
        _ => IvddpcError::new_err(err.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| IvddpcError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new_err((format!("{what}: {e}"), vec![what.to_string()])))
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn model<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str, builtin: impl Fn(&str) -> Option<T>) -> PyResult<T> {
    if let Ok(name) = obj.extract::<String>() {
        return builtin(&name).ok_or_else(|| PyValueError::new_err(format!("unknown built-in {what} `{name}`")));
    }
    from_py(obj, what)
}

/// Validated experiment configuration.
#[pyclass(module = "ivddpc_py", frozen)]
struct Config {
    inner: ExperimentConfig,
}

#[pymethods]
impl Config {
    /// Load a JSON file, applying `{"dotted.key": json_value_text}` overrides.
    #[staticmethod]
    #[pyo3(signature = (path, overrides = None))]
    fn load(path: &str, overrides: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let inner = ExperimentConfig::load(Path::new(path), &overrides.unwrap_or_default()).map_err(to_py_err)?;
        Ok(Config { inner })
    }

    /// Parse a configuration dict; relative model files resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (doc, base_dir = "."))]
    fn from_dict(doc: &Bound<'_, PyAny>, base_dir: &str) -> PyResult<Self> {
        let value: serde_json::Value = from_py(doc, "config")?;
        let inner = ExperimentConfig::from_value(value, Path::new(base_dir)).map_err(to_py_err)?;
        inner.validate().map_err(to_py_err)?;
        Ok(Config { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn fingerprint(&self) -> PyResult<String> {
        self.inner.fingerprint().map_err(to_py_err)
    }

    #[getter]
    fn replicates(&self) -> usize {
        self.inner.replicates
    }

    #[getter]
    fn noise_levels(&self) -> usize {
        self.inner.noise.len()
    }

    /// Variant labels in run order (one entry per λ for `rddpc_iv`).
    #[getter]
    fn variants(&self) -> Vec<String> {
        self.inner
            .expanded_variants()
            .iter()
            .map(|v| match v.lambda() {
                Some(l) => format!("{}@{l}", v.label()),
                None => v.label().to_string(),
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Config(name={:?}, replicates={})", self.inner.name, self.inner.replicates)
    }
}

/// Offline closed-loop dataset of one replicate.
#[pyclass(module = "ivddpc_py", frozen)]
struct Dataset {
    inner: bench::Dataset,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint.clone()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.noise.sigma
    }

    #[getter]
    fn snr_db(&self) -> Option<f64> {
        self.inner.noise.snr_db
    }

    #[getter]
    fn columns(&self) -> usize {
        self.inner.bundle.columns()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.trajectory.u)
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.trajectory.y)
    }

    #[getter]
    fn r(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.trajectory.r.as_ref().map(rows)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }
}

/// Simulate the offline experiment of `replicate` at noise level `noise_index`.
#[pyfunction]
#[pyo3(signature = (config, noise_index = 0, replicate = 0))]
fn collect(py: Python<'_>, config: &Config, noise_index: usize, replicate: usize) -> PyResult<Dataset> {
    let level = level(&config.inner, noise_index)?;
    let inner = py
        .detach(|| bench::collect_dataset(&config.inner, &level, replicate))
        .map_err(to_py_err)?;
    Ok(Dataset { inner })
}

fn level(cfg: &ExperimentConfig, noise_index: usize) -> PyResult<NoiseLevel> {
    cfg.noise
        .get(noise_index)
        .copied()
        .ok_or_else(|| PyValueError::new_err(format!("noise_index {noise_index} out of range")))
}

/// Every variant on one cell; returns `(record, trace)` dicts in variant order.
#[pyfunction]
#[pyo3(signature = (config, noise_index = 0, replicate = 0))]
fn run_unit<'py>(
    py: Python<'py>,
    config: &Config,
    noise_index: usize,
    replicate: usize,
) -> PyResult<Vec<(Bound<'py, PyAny>, Bound<'py, PyAny>)>> {
    level(&config.inner, noise_index)?;
    let outputs = py
        .detach(|| {
            let fp = config.inner.fingerprint()?;
            bench::run_unit(&config.inner, &fp, noise_index, replicate, None)
        })
        .map_err(to_py_err)?;
    outputs
        .iter()
        .map(|o| Ok((to_py(py, &o.record)?, to_py(py, &o.trace)?)))
        .collect()
}

/// The full campaign in memory; `jobs = 0` uses every core.
#[pyfunction]
#[pyo3(signature = (config, jobs = 0))]
fn monte_carlo<'py>(py: Python<'py>, config: &Config, jobs: usize) -> PyResult<Bound<'py, PyAny>> {
    let records = py.detach(|| bench::monte_carlo(&config.inner, jobs)).map_err(to_py_err)?;
    to_py(py, &records)
}

/// Group record dicts and summarize `J`.
#[pyfunction]
#[pyo3(signature = (records, group_by = vec!["noise_index".to_string(), "variant".to_string(), "lambda".to_string()]))]
fn summarize<'py>(py: Python<'py>, records: &Bound<'py, PyAny>, group_by: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<RunRecord> = from_py(records, "records")?;
    let keys = group_by.iter().map(|k| GroupKey::parse(k)).collect::<Result<Vec<_>, _>>().map_err(to_py_err)?;
    let groups = bench::summarize(&records, &keys).map_err(to_py_err)?;
    let out: Vec<serde_json::Value> = groups
        .iter()
        .map(|g| {
            let mut row = serde_json::Map::new();
            for (k, v) in &g.key {
                row.insert(k.clone(), serde_json::Value::String(v.clone()));
            }
            row.insert("runs".into(), g.runs.into());
            row.insert("failures".into(), g.failures.into());
            row.insert("stats".into(), serde_json::to_value(g.stats).unwrap_or_default());
            serde_json::Value::Object(row)
        })
        .collect();
    to_py(py, &out)
}

/// Built-in plant as a model dict (`siso`, `surrogate_2x2`).
#[pyfunction]
fn builtin_plant<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let m = bench::builtin_plant(name).ok_or_else(|| PyValueError::new_err(format!("unknown plant `{name}`")))?;
    to_py(py, &m)
}

/// Built-in controller as a model dict (`siso`, `mimo`).
#[pyfunction]
fn builtin_controller<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let m = bench::builtin_controller(name).ok_or_else(|| PyValueError::new_err(format!("unknown controller `{name}`")))?;
    to_py(py, &m)
}

/// Closed loop from rest; `plant` and `controller` are model dicts or
/// built-in names, `r` and `e` are `p × N` nested lists.
#[pyfunction]
fn simulate_closed_loop<'py>(
    py: Python<'py>,
    plant: &Bound<'py, PyAny>,
    controller: &Bound<'py, PyAny>,
    r: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let plant: StateSpaceModel = model(plant, "plant", bench::builtin_plant)?;
    let ctrl: ControllerModel = model(controller, "controller", bench::builtin_controller)?;
    let (r, e) = (matrix(r, "r")?, matrix(e, "e")?);
    let traj = sslib::simulate_closed_loop(&plant, &ctrl, &r, &e, &DVector::zeros(plant.n()), &DVector::zeros(ctrl.n()))
        .map_err(to_py_err)?;
    to_py(py, &traj)
}

/// Left coprime factors `(V, U)` of a controller dict or built-in name.
#[pyfunction]
fn lcf<'py>(py: Python<'py>, controller: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let ctrl: ControllerModel = model(controller, "controller", bench::builtin_controller)?;
    to_py(py, &ivddpc::iv::lcf(&ctrl).map_err(to_py_err)?)
}

/// Innovation std that gives `snr_db` on the collection experiment of `replicate`.
#[pyfunction]
#[pyo3(signature = (config, snr_db, replicate = 0))]
fn calibrate_snr<'py>(py: Python<'py>, config: &Config, snr_db: f64, replicate: usize) -> PyResult<Bound<'py, PyAny>> {
    let setting = bench::resolve_noise(&config.inner, &NoiseLevel::Snr { snr_db }, replicate).map_err(to_py_err)?;
    to_py(py, &setting)
}

#[pymodule]
fn ivddpc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("IvddpcError", m.py().get_type::<IvddpcError>())?;
    m.add("SCHEMA_VERSION", ivddpc::schema::SCHEMA_VERSION)?;
    m.add_class::<Config>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(collect, m)?)?;
    m.add_function(wrap_pyfunction!(run_unit, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_plant, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_controller, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_closed_loop, m)?)?;
    m.add_function(wrap_pyfunction!(lcf, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_snr, m)?)?;
    Ok(())
}
