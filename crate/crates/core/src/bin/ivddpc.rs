//! Command-line front end of the benchmark harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure (partial
//! results stay on disk). Errors are printed to stderr as one JSON object.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ivddpc::bench::{
    decorrelation, last_window, load_or_collect, read_records, restriction, run_campaign, run_unit, summarize,
    write_metadata, write_records, write_summary, write_trace, CampaignOptions, DatasetCache, ExperimentConfig,
    GroupKey,
};
use ivddpc::iv::IvVariant;
use ivddpc::{Error, Result};

#[derive(Parser)]
#[command(name = "ivddpc", version, about = "IV-aided data-driven predictive control benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set replicates=5` or `--set task.n_c=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed (overrides `base_seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Clone)]
struct Cell {
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    /// Index into the configured noise levels.
    #[arg(long, default_value_t = 0)]
    noise_index: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and cache the offline datasets.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Only this replicate (default: all).
        #[arg(long)]
        replicate: Option<usize>,
    },
    /// One experiment: every variant on one replicate, with traces.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Monte Carlo campaign; writes records.csv, summary.csv, timing.csv and metadata.json.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Do not cache offline datasets.
        #[arg(long)]
        no_cache: bool,
    },
    /// Instrument decorrelation and controller-restriction diagnostics.
    Diag {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Summarize a records file.
    Summarize {
        #[arg(long)]
        records: PathBuf,
        /// Comma-separated grouping columns.
        #[arg(long, value_delimiter = ',', default_value = "noise_index,variant,lambda")]
        group_by: Vec<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    for item in &common.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config {
                message: format!("override `{item}` is not KEY=VALUE"),
                keys: vec!["--set".into()],
            })?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("base_seed".into(), seed.to_string()));
    }
    ExperimentConfig::load(&common.config, &overrides)
}

fn print(value: &serde_json::Value) {
    println!("{}", serde_json::to_string(value).expect("json value"));
}

fn cache_dir(out: &Path) -> PathBuf {
    out.join("cache")
}

fn collect(common: &Common, replicate: Option<usize>) -> Result<bool> {
    let cfg = load(common)?;
    let cache = DatasetCache::new(cache_dir(&common.out_dir))?;
    let reps: Vec<usize> = match replicate {
        Some(r) => vec![r],
        None => (0..cfg.replicates).collect(),
    };
    for (i, level) in cfg.noise.iter().enumerate() {
        for &r in &reps {
            let (ds, status) = cache.get_or_collect(&cfg, level, r)?;
            print(&serde_json::json!({
                "noise_index": i,
                "replicate": r,
                "fingerprint": ds.fingerprint,
                "cache": format!("{status:?}").to_lowercase(),
                "sigma": ds.noise.sigma,
                "snr_db": ds.noise.snr_db,
                "samples": ds.trajectory.len(),
                "columns": ds.bundle.columns(),
                "path": cache.path(&ds.fingerprint),
            }));
        }
    }
    Ok(true)
}

fn run(common: &Common, cell: &Cell) -> Result<bool> {
    let cfg = load(common)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let cache = DatasetCache::new(cache_dir(&common.out_dir))?;
    let fp = cfg.fingerprint()?;
    let outputs = run_unit(&cfg, &fp, cell.noise_index, cell.replicate, Some(&cache))?;
    let variants = cfg.expanded_variants();
    let records: Vec<_> = outputs.iter().map(|o| o.record.clone()).collect();
    write_records(BufWriter::new(File::create(common.out_dir.join("records.csv"))?), &records)?;
    for (o, v) in outputs.iter().zip(&variants) {
        if let Some(trace) = &o.trace {
            write_trace(&common.out_dir, &o.record, v, trace)?;
        }
        print(&serde_json::json!({
            "variant": o.record.variant,
            "lambda": o.record.lambda,
            "j": o.record.j,
            "status": o.record.status,
            "trace": format!("trace_{}.csv", o.record.run),
            "error": o.record.error,
        }));
    }
    write_metadata(&common.out_dir, &cfg, &records)?;
    Ok(records.iter().all(|r| !r.failed()))
}

fn bench(common: &Common, no_cache: bool) -> Result<bool> {
    let cfg = load(common)?;
    let opts = CampaignOptions {
        out_dir: common.out_dir.clone(),
        jobs: common.jobs,
        cache_dir: (!no_cache).then(|| cache_dir(&common.out_dir)),
        traces: false,
    };
    let outcome = run_campaign(&cfg, &opts)?;
    let summary = summarize(&outcome.records, &GroupKey::DEFAULT)?;
    write_summary(BufWriter::new(File::create(common.out_dir.join("summary.csv"))?), &summary)?;
    print(&serde_json::json!({
        "records": outcome.records.len(),
        "failures": outcome.failures,
        "records_path": outcome.records_path,
        "summary_path": common.out_dir.join("summary.csv"),
    }));
    Ok(outcome.failures == 0)
}

fn diag(common: &Common, cell: &Cell) -> Result<bool> {
    let cfg = load(common)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let cache = DatasetCache::new(cache_dir(&common.out_dir))?;
    let level = cfg.noise.get(cell.noise_index).ok_or_else(|| Error::Config {
        message: format!("noise index {} out of range", cell.noise_index),
        keys: vec!["--noise-index".into()],
    })?;
    let (ds, _) = load_or_collect(Some(&cache), &cfg, level, cell.replicate)?;
    let ctrl = cfg.controller()?;
    let decor = decorrelation(&ds.bundle, &ctrl)?;
    let z_p = last_window(&ds.trajectory.u, &ds.trajectory.y, cfg.task.lp)?;
    let y_r = cfg.task.reference_window(&cfg.task.reference_signal()?, 1)?;
    let restr = restriction(
        &ds.bundle,
        &ctrl,
        &cfg.task,
        &z_p,
        &y_r,
        &[IvVariant::PastOnly, IvVariant::Combined],
    )?;
    let report = serde_json::json!({
        "dataset": ds.fingerprint,
        "columns": ds.bundle.columns(),
        "sigma": ds.noise.sigma,
        "snr_db": ds.noise.snr_db,
        "decorrelation": decor,
        "restriction": restr,
    });
    std::fs::write(common.out_dir.join("diag.json"), serde_json::to_string_pretty(&report)?)?;
    print(&report);
    Ok(true)
}

fn summarize_cmd(records: &Path, group_by: &[String], out_dir: &Path) -> Result<bool> {
    let keys = group_by.iter().map(|k| GroupKey::parse(k.trim())).collect::<Result<Vec<_>>>()?;
    let recs = read_records(records).map_err(|e| Error::Config {
        message: format!("cannot read records {}: {e}", records.display()),
        keys: vec!["--records".into()],
    })?;
    let summary = summarize(&recs, &keys)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("summary.csv");
    write_summary(BufWriter::new(File::create(&path)?), &summary)?;
    print(&serde_json::json!({ "groups": summary.len(), "summary_path": path }));
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Collect { common, replicate } => collect(common, *replicate),
        Command::Run { common, cell } => run(common, cell),
        Command::Bench { common, no_cache } => bench(common, *no_cache),
        Command::Diag { common, cell } => diag(common, cell),
        Command::Summarize {
            records,
            group_by,
            out_dir,
        } => summarize_cmd(records, group_by, out_dir),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": "run_failures", "message": "some runs failed; see records.csv"}})
            );
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("{}", err.report());
            ExitCode::from(if matches!(err, Error::Config { .. }) { 2 } else { 3 })
        }
    }
}
