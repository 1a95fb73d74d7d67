//! Result files: flat trial records, per-cell summaries, and a manifest
//! describing how they were produced.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! files are byte-stable across runs and worker counts. The manifest is
//! the only file carrying wall-clock information.

use adaptive_alloc_core::rng::fnv1a64;
use adaptive_alloc_core::sim::{ExperimentConfig, SummaryRow, TrialRecord};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// Hash of the canonicalized config, for pairing outputs with inputs.
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    /// Worker threads requested; 0 means all cores. Informational only,
    /// the result files do not depend on it.
    pub workers: usize,
    pub policies: Vec<String>,
    pub b_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    pub started_unix_s: u64,
    pub duration_s: f64,
    pub trials_csv: String,
    pub summary_csv: String,
}

fn float(v: f64) -> String {
    format!("{v}")
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["policy", "B", "p0", "trial", "errors", "type1", "type2", "spent"])?;
    for r in records {
        w.write_record([
            r.policy.as_str(),
            &float(r.b),
            &float(r.p0),
            &r.trial.to_string(),
            &float(r.errors),
            &r.type1.to_string(),
            &r.type2.to_string(),
            &float(r.spent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["policy", "B", "p0", "mean_errors", "std_err", "trials"])?;
    for r in rows {
        w.write_record([
            r.policy.as_str(),
            &float(r.b),
            &float(r.p0),
            &float(r.mean_errors),
            &float(r.std_err),
            &r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest(
    path: &Path,
    cfg: &ExperimentConfig,
    workers: usize,
    duration_s: f64,
    trials_csv: &Path,
    summary_csv: &Path,
) -> Result<()> {
    let canonical = serde_json::to_string(cfg)?;
    let started_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: format!("{:016x}", fnv1a64(canonical.as_bytes())),
        seed: cfg.seed,
        n: cfg.n,
        trials: cfg.trials,
        workers,
        policies: cfg.policies.iter().map(|p| p.label()).collect(),
        b_grid: cfg.b_grid.clone(),
        p0_grid: cfg.p0_grid.clone(),
        started_unix_s,
        duration_s,
        trials_csv: trials_csv.display().to_string(),
        summary_csv: summary_csv.display().to_string(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
