//! Monte Carlo campaigns over noise levels, replicates and controller
//! variants.
//!
//! The unit of work is one (noise level, replicate) pair: its offline data
//! and online innovations are shared by every variant, which gives the
//! paired design. Units run on a bounded worker pool; a single collector
//! writes their results in unit order, so output files do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::collect::{load_or_collect, Dataset, DatasetCache};
use super::config::ExperimentConfig;
use super::seeds::{derive_seed, fingerprint};
use crate::control::{build_policy, receding_horizon_run, ControllerVariant, OfflineContext, RunTrace};
use crate::error::{Error, Result};
use crate::schema::SCHEMA_VERSION;
use crate::sslib::{gaussian_noise, NOISE_GENERATOR};

/// How the SNR of a campaign cell is defined; written to the metadata.
pub const SNR_DEFINITION: &str = "10*log10(var(noise-free closed-loop output) / var(noise-induced output)) \
on the offline experiment; variances pooled over channels; noise variance is the exact stationary \
variance of the closed-loop e->y path; sigma found by bisection on log(sigma) to 0.01 dB";

/// How random streams are seeded; written to the metadata.
pub const SEED_DERIVATION: &str =
    "first 8 bytes (little endian) of sha256(\"{base_seed}/{replicate}/{role}\"), role in offline|online|reference|excitation";

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Fingerprint of the resolved configuration.
    pub config: String,
    /// Fingerprint of this run; names its trace files.
    pub run: String,
    pub noise_index: usize,
    pub replicate: usize,
    pub offline_seed: u64,
    pub online_seed: u64,
    pub variant: String,
    pub lambda: Option<f64>,
    pub target_snr_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub sigma: Option<f64>,
    pub j: Option<f64>,
    pub status: RunStatus,
    /// Completed online steps.
    pub steps: usize,
    pub qp_iterations: usize,
    pub qp_iterations_max: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.status == RunStatus::Failed
    }
}

/// Output of one run: the record, its trace (if the run started) and wall time.
pub struct RunOutput {
    pub record: RunRecord,
    pub trace: Option<RunTrace>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    /// Directory of the offline-data cache.
    pub cache_dir: Option<PathBuf>,
    /// Write every trace regardless of the configuration.
    pub traces: bool,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub records: Vec<RunRecord>,
    pub failures: usize,
    pub records_path: PathBuf,
}

#[derive(Serialize)]
struct RunKey<'a> {
    config: &'a str,
    noise_index: usize,
    replicate: usize,
    variant: &'a ControllerVariant,
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    schema_version: u32,
    fingerprint: &'a str,
    config: &'a str,
    variant: &'a ControllerVariant,
    replicate: usize,
    noise_index: usize,
    j: Option<f64>,
    failure: &'a Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Run every variant on one (noise level, replicate) cell.
pub fn run_unit(
    cfg: &ExperimentConfig,
    config_fp: &str,
    noise_index: usize,
    replicate: usize,
    cache: Option<&DatasetCache>,
) -> Result<Vec<RunOutput>> {
    let variants = cfg.expanded_variants();
    let level = cfg
        .noise
        .get(noise_index)
        .ok_or_else(|| Error::InvalidArgument(format!("noise index {noise_index} out of range")))?;
    let online_seed = derive_seed(cfg.base_seed, replicate, "online");
    let base = |variant: &ControllerVariant| -> Result<RunRecord> {
        Ok(RunRecord {
            config: config_fp.to_string(),
            run: fingerprint(&RunKey {
                config: config_fp,
                noise_index,
                replicate,
                variant,
            })?,
            noise_index,
            replicate,
            offline_seed: derive_seed(cfg.base_seed, replicate, "offline"),
            online_seed,
            variant: variant.label().to_string(),
            lambda: variant.lambda(),
            target_snr_db: level.snr_db(),
            snr_db: None,
            sigma: None,
            j: None,
            status: RunStatus::Failed,
            steps: 0,
            qp_iterations: 0,
            qp_iterations_max: 0,
            error: None,
        })
    };

    let start = Instant::now();
    let dataset: Result<Dataset> = load_or_collect(cache, cfg, level, replicate).map(|(d, _)| d);
    let setup_seconds = start.elapsed().as_secs_f64();
    let dataset = match dataset {
        Ok(d) => d,
        Err(err) => {
            log::warn!("offline data of replicate {replicate} failed: {err}");
            return variants
                .iter()
                .map(|v| {
                    let mut record = base(v)?;
                    record.error = Some(err.to_string());
                    Ok(RunOutput {
                        record,
                        trace: None,
                        wall_seconds: setup_seconds,
                    })
                })
                .collect();
        }
    };
    let ctrl = cfg.controller()?;
    let plant = dataset.plant.clone();
    let sigma = dataset.noise.sigma;
    let noise = gaussian_noise(online_seed, &vec![sigma; plant.p()], cfg.task.lp + cfg.task.n_c)?;
    let mut ctx = OfflineContext::new(dataset.bundle, ctrl.clone());

    let mut out = Vec::with_capacity(variants.len());
    for variant in &variants {
        let start = Instant::now();
        let mut record = base(variant)?;
        record.snr_db = dataset.noise.snr_db;
        record.sigma = Some(sigma);
        let trace = match &mut ctx {
            Ok(ctx) => build_policy(variant, &plant, Some(ctx), &cfg.task).and_then(|mut policy| {
                receding_horizon_run(&plant, &mut policy, &cfg.task, &noise, &ctrl, variant.label())
            }),
            Err(err) => Err(Error::InvalidArgument(format!("controller factorization failed: {err}"))),
        };
        let trace = match trace {
            Ok(trace) => {
                let online = trace.online_columns();
                record.steps = online.len();
                record.qp_iterations = trace.iterations[online.clone()].iter().sum();
                record.qp_iterations_max = trace.iterations[online].iter().copied().max().unwrap_or(0);
                record.j = finite(trace.j);
                record.error = trace.failure.clone();
                record.status = if trace.failed() || record.j.is_none() {
                    RunStatus::Failed
                } else {
                    RunStatus::Ok
                };
                Some(trace)
            }
            Err(err) => {
                log::warn!("{} on replicate {replicate}: {err}", variant.label());
                record.error = Some(err.to_string());
                None
            }
        };
        out.push(RunOutput {
            record,
            trace,
            wall_seconds: start.elapsed().as_secs_f64() + setup_seconds / variants.len() as f64,
        });
    }
    Ok(out)
}

/// All (noise level, replicate) cells in output order.
fn units(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    (0..cfg.noise.len())
        .flat_map(|i| (0..cfg.replicates).map(move |r| (i, r)))
        .collect()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// In-memory campaign: every record, in unit order, without touching disk.
pub fn monte_carlo(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let fp = cfg.fingerprint()?;
    let units = units(cfg);
    let results: Vec<Result<Vec<RunOutput>>> =
        pool(jobs)?.install(|| units.par_iter().map(|&(i, r)| run_unit(cfg, &fp, i, r, None)).collect());
    let mut out = Vec::new();
    for res in results {
        out.extend(res?.into_iter().map(|o| o.record));
    }
    Ok(out)
}

/// Write one trace as `trace_<run>.csv` with a JSON sidecar.
pub fn write_trace(dir: &Path, record: &RunRecord, variant: &ControllerVariant, trace: &RunTrace) -> Result<()> {
    let csv_path = dir.join(format!("trace_{}.csv", record.run));
    trace.write_csv(BufWriter::new(File::create(csv_path)?))?;
    let sidecar = TraceSidecar {
        schema_version: SCHEMA_VERSION,
        fingerprint: &record.run,
        config: &record.config,
        variant,
        replicate: record.replicate,
        noise_index: record.noise_index,
        j: record.j,
        failure: &trace.failure,
    };
    std::fs::write(
        dir.join(format!("trace_{}.json", record.run)),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// Deterministic campaign metadata (`metadata.json`).
pub fn write_metadata(dir: &Path, cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<()> {
    let failures = records.iter().filter(|r| r.failed()).count();
    let meta = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config_fingerprint": cfg.fingerprint()?,
        "config": cfg,
        "noise_generator": NOISE_GENERATOR,
        "seed_derivation": SEED_DERIVATION,
        "snr_definition": SNR_DEFINITION,
        "records": records.len(),
        "failures": failures,
    });
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Run a campaign and stream `records.csv` (and traces) into `out_dir`.
/// Wall times go to `timing.csv`, the only nondeterministic output.
pub fn run_campaign(cfg: &ExperimentConfig, opts: &CampaignOptions) -> Result<CampaignOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out_dir)?;
    let fp = cfg.fingerprint()?;
    let cache = opts.cache_dir.as_ref().map(DatasetCache::new).transpose()?;
    let units = units(cfg);
    let variants = cfg.expanded_variants();
    let traces = opts.traces || cfg.output.traces;
    let records_path = opts.out_dir.join("records.csv");

    let mut records_csv = csv::Writer::from_writer(BufWriter::new(File::create(&records_path)?));
    let mut timing_csv = csv::Writer::from_writer(BufWriter::new(File::create(opts.out_dir.join("timing.csv"))?));
    timing_csv.write_record(["run", "variant", "replicate", "wall_seconds"])?;

    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<RunOutput>>)>();
    let pool = pool(opts.jobs)?;
    let mut records = Vec::new();
    let mut first_error: Option<Error> = None;

    std::thread::scope(|scope| -> Result<()> {
        let worker = scope.spawn(|| {
            let units = &units;
            let fp = &fp;
            let cache = cache.as_ref();
            pool.install(move || {
                units.par_iter().enumerate().for_each_with(tx, |tx, (idx, &(i, r))| {
                    let _ = tx.send((idx, run_unit(cfg, fp, i, r, cache)));
                });
            });
        });
        let mut pending: BTreeMap<usize, Result<Vec<RunOutput>>> = BTreeMap::new();
        let mut next = 0;
        for (idx, res) in rx {
            pending.insert(idx, res);
            while let Some(res) = pending.remove(&next) {
                next += 1;
                match res {
                    Ok(outputs) => {
                        for (o, variant) in outputs.into_iter().zip(&variants) {
                            records_csv.serialize(&o.record)?;
                            timing_csv.write_record([
                                o.record.run.as_str(),
                                o.record.variant.as_str(),
                                &o.record.replicate.to_string(),
                                &format!("{:.6}", o.wall_seconds),
                            ])?;
                            if traces {
                                if let Some(trace) = &o.trace {
                                    write_trace(&opts.out_dir, &o.record, variant, trace)?;
                                }
                            }
                            records.push(o.record);
                        }
                        records_csv.flush()?;
                        timing_csv.flush()?;
                    }
                    Err(err) => {
                        log::error!("campaign unit {} failed: {err}", next - 1);
                        first_error.get_or_insert(err);
                    }
                }
            }
        }
        worker.join().expect("campaign worker panicked");
        Ok(())
    })?;
    records_csv.flush()?;
    timing_csv.flush()?;
    if let Some(err) = first_error {
        return Err(err);
    }
    write_metadata(&opts.out_dir, cfg, &records)?;
    let failures = records.iter().filter(|r| r.failed()).count();
    Ok(CampaignOutcome {
        records,
        failures,
        records_path,
    })
}

/// Read `records.csv`.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Write records as CSV.
pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
