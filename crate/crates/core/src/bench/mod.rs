//! Experiment orchestration: configuration, seeding, noise calibration,
//! offline data collection, Monte Carlo campaigns, summaries and
//! diagnostics.

mod campaign;
mod collect;
mod config;
mod diag;
mod seeds;
mod snr;
mod summary;

pub use campaign::{
    monte_carlo, read_records, run_campaign, run_unit, write_metadata, write_records, write_trace, CampaignOptions,
    CampaignOutcome, RunOutput, RunRecord, RunStatus, SEED_DERIVATION, SNR_DEFINITION,
};
pub use collect::{collect_dataset, load_or_collect, resolve_noise, CacheStatus, Dataset, DatasetCache, NoiseSetting};
pub use config::{
    apply_override, builtin_controller, builtin_plant, lambda_grid, CollectionSpec, ExcitationChannel,
    ExperimentConfig, ModelSpec, NoiseLevel, OutputSpec, VariantKind, RV_FLOOR,
};
pub use diag::{decorrelation, last_window, restriction, Decorrelation, Restriction};
pub use seeds::{canonical_json, derive_seed, fingerprint};
pub use snr::{
    calibrate_snr, measure_snr, measure_snr_empirical, pooled_variance, signal_variance, stationary_covariance,
    unit_noise_variance, SnrCalibration, SNR_TOL_DB,
};
pub use summary::{quantile, summarize, write_summary, GroupKey, GroupSummary, Stats};
