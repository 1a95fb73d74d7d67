//! Calibration cache: one JSON record per (budget, prior) cell, named by a
//! hash of everything that determines the fractions except the horizon.
//! A record calibrated for a long horizon serves any shorter one, because
//! shorter-horizon fractions are prefixes of longer calibrations.

use adaptive_alloc_core::olfc::{
    calibrate_beta_table, CalibrationRecord, CALIBRATION_SCHEMA_VERSION,
};
use adaptive_alloc_core::rng::fnv1a64;
use adaptive_alloc_core::sim::{calibration_key, CalibrationStore, ExperimentConfig};
use anyhow::{Context, Result};
use std::path::{Path, PathBuf};

pub fn cache_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("ADAPTIVE_ALLOC_CACHE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("calib-cache"))
}

fn resolved_proxy(cfg: &ExperimentConfig) -> usize {
    cfg.calibration.proxy_n.unwrap_or(cfg.n.min(1000)).max(1)
}

fn cell_file(cfg: &ExperimentConfig, b: f64, p0: f64) -> Result<String> {
    let solver = serde_json::to_string(&cfg.calibration.solver)?;
    let key = format!(
        "v{}|mu0={:?}|var0={:?}|mu1={:?}|var1={:?}|nu2={:?}|c={:?}|b={:?}|p0={:?}|seed={}|mc={}|grid={}|refine={}|proxy={}|{}",
        CALIBRATION_SCHEMA_VERSION,
        cfg.mu0,
        cfg.var0,
        cfg.mu1,
        cfg.var1,
        cfg.nu2,
        cfg.cost,
        b,
        p0,
        cfg.seed,
        cfg.calibration.mc_samples,
        cfg.calibration.beta_grid,
        cfg.calibration.refine_iters,
        resolved_proxy(cfg),
        solver,
    );
    Ok(format!("beta-{:016x}.json", fnv1a64(key.as_bytes())))
}

pub struct CellOutcome {
    pub b: f64,
    pub p0: f64,
    pub computed: bool,
    pub fractions: Vec<f64>,
}

/// Load or compute every table the config needs, mirroring results into
/// the cache directory. With `force`, existing entries are recomputed.
pub fn ensure_store(
    cfg: &ExperimentConfig,
    dir: &Path,
    force: bool,
) -> Result<(CalibrationStore, Vec<CellOutcome>)> {
    let mut store = CalibrationStore::new();
    let horizons = cfg.olfc_horizons();
    let Some(&max_h) = horizons.iter().max() else {
        return Ok((store, Vec::new()));
    };
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating cache directory {}", dir.display()))?;
    let mut outcomes = Vec::new();
    for &b in &cfg.b_grid {
        for &p0 in &cfg.p0_grid {
            let path = dir.join(cell_file(cfg, b, p0)?);
            if !force {
                if let Some(rec) = read_record(&path)? {
                    if rec.schema_version == CALIBRATION_SCHEMA_VERSION && rec.horizon >= max_h {
                        let fractions = rec.fractions.clone();
                        store.insert(b, p0, rec.table().map_err(|e| anyhow::anyhow!("{e}"))?);
                        outcomes.push(CellOutcome {
                            b,
                            p0,
                            computed: false,
                            fractions,
                        });
                        continue;
                    }
                }
            }
            let table = calibrate_beta_table(
                cfg.prior(p0).map_err(|e| anyhow::anyhow!("{e}"))?,
                cfg.noise(),
                b,
                max_h,
                cfg.cost,
                cfg.n,
                &cfg.calibration,
                calibration_key(cfg.seed, b, p0),
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            let rec = CalibrationRecord {
                schema_version: CALIBRATION_SCHEMA_VERSION,
                prior: cfg.prior(p0).map_err(|e| anyhow::anyhow!("{e}"))?,
                nu2: cfg.nu2,
                horizon: max_h,
                budget_per_test: b,
                cost: cfg.cost,
                proxy_n: resolved_proxy(cfg),
                mc_samples: cfg.calibration.mc_samples,
                seed: cfg.seed,
                fractions: table.fractions().to_vec(),
            };
            let mut text = serde_json::to_string_pretty(&rec)?;
            text.push('\n');
            std::fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))?;
            let fractions = rec.fractions.clone();
            store.insert(b, p0, table);
            outcomes.push(CellOutcome {
                b,
                p0,
                computed: true,
                fractions,
            });
        }
    }
    Ok((store, outcomes))
}

fn read_record(path: &Path) -> Result<Option<CalibrationRecord>> {
    if !path.exists() {
        return Ok(None);
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(rec) => Ok(Some(rec)),
        // A corrupt or foreign file is treated as a miss and overwritten.
        Err(_) => Ok(None),
    }
}
