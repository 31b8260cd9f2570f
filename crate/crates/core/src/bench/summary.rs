//! Aggregation of run records.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::campaign::RunRecord;
use crate::error::{Error, Result};

/// Columns of `records.csv` a summary may group by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Variant,
    Lambda,
    NoiseIndex,
    TargetSnrDb,
    Replicate,
}

impl GroupKey {
    pub const DEFAULT: [GroupKey; 3] = [GroupKey::NoiseIndex, GroupKey::Variant, GroupKey::Lambda];

    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Variant => "variant",
            GroupKey::Lambda => "lambda",
            GroupKey::NoiseIndex => "noise_index",
            GroupKey::TargetSnrDb => "target_snr_db",
            GroupKey::Replicate => "replicate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "variant" => Ok(GroupKey::Variant),
            "lambda" => Ok(GroupKey::Lambda),
            "noise_index" => Ok(GroupKey::NoiseIndex),
            "target_snr_db" => Ok(GroupKey::TargetSnrDb),
            "replicate" => Ok(GroupKey::Replicate),
            other => Err(Error::config(format!("unknown group key `{other}`"), vec!["group_by".into()])),
        }
    }

    fn value(self, r: &RunRecord) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        match self {
            GroupKey::Variant => r.variant.clone(),
            GroupKey::Lambda => opt(r.lambda),
            GroupKey::NoiseIndex => r.noise_index.to_string(),
            GroupKey::TargetSnrDb => opt(r.target_snr_db),
            GroupKey::Replicate => r.replicate.to_string(),
        }
    }
}

/// Distribution of `J` within one group; failed runs are counted, not
/// included in the statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub key: Vec<(String, String)>,
    pub runs: usize,
    pub failures: usize,
    pub stats: Option<Stats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`), the default of most statistics packages.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stats {
            n,
            mean,
            std,
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[n - 1],
        })
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

/// Group records and summarize `J`; groups keep first-appearance order.
pub fn summarize(records: &[RunRecord], keys: &[GroupKey]) -> Result<Vec<GroupSummary>> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to summarize".into()));
    }
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: BTreeMap<Vec<String>, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let k: Vec<String> = keys.iter().map(|g| g.value(r)).collect();
        let entry = groups.entry(k.clone()).or_default();
        if entry.is_empty() {
            order.push(k);
        }
        entry.push(r);
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let members = &groups[&k];
            let js: Vec<f64> = members.iter().filter(|r| !r.failed()).filter_map(|r| r.j).collect();
            GroupSummary {
                key: keys.iter().map(|g| g.name().to_string()).zip(k).collect(),
                runs: members.len(),
                failures: members.iter().filter(|r| r.failed()).count(),
                stats: Stats::from_values(&js),
            }
        })
        .collect())
}

/// Write `summary.csv`: key columns, then counts and statistics of `J`.
pub fn write_summary<W: Write>(out: W, summary: &[GroupSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = summary.first() {
        let mut header: Vec<String> = first.key.iter().map(|(k, _)| k.clone()).collect();
        header.extend(
            ["runs", "failures", "n", "mean", "std", "min", "q1", "median", "q3", "max"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
    }
    for g in summary {
        let mut row: Vec<String> = g.key.iter().map(|(_, v)| v.clone()).collect();
        row.push(g.runs.to_string());
        row.push(g.failures.to_string());
        match &g.stats {
            Some(s) => {
                row.push(s.n.to_string());
                row.extend([s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max].iter().map(|v| format!("{v:?}")));
            }
            None => {
                row.push("0".into());
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn single_value_stats() {
        let s = Stats::from_values(&[3.5]).unwrap();
        assert_eq!((s.mean, s.median, s.std), (3.5, 3.5, 0.0));
        assert!(Stats::from_values(&[]).is_none());
    }
}
