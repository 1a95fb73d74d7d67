//! Command-line driver: calibrate replanning fractions, run experiment
//! sweeps, and summarize finished runs.

mod cache;
mod output;
mod report;

use adaptive_alloc_core::sim::{run_experiment, summarize, ExperimentConfig};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "adaptive-alloc",
    version,
    about = "Budgeted sensing experiments over many simultaneous binary tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and cache replanning fractions for every grid cell that
    /// needs them. Safe to rerun; existing entries are reused.
    Calibrate {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Recompute even when a matching cache entry exists.
        #[arg(long)]
        force: bool,
        /// Cache directory. Defaults to $ADAPTIVE_ALLOC_CACHE, then
        /// ./calib-cache.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run the configured sweep and write trials.csv, summary.csv and
    /// manifest.json into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core. The outputs are identical
        /// for any worker count.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Calibrate {
            config,
            force,
            cache,
        } => cmd_calibrate(&config, force, cache),
        Command::Run {
            config,
            out,
            workers,
            cache,
        } => cmd_run(&config, &out, workers, cache),
        Command::Report { dir, format } => cmd_report(&dir, format),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(cfg)
}

fn cmd_calibrate(config: &Path, force: bool, cache: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let dir = cache::cache_dir(cache);
    let (_, outcomes) = cache::ensure_store(&cfg, &dir, force)?;
    if outcomes.is_empty() {
        println!("no policies in the config need calibration");
        return Ok(());
    }
    for o in &outcomes {
        println!(
            "B={} p0={}: {} fractions {:?}",
            o.b,
            o.p0,
            if o.computed { "calibrated" } else { "cached" },
            o.fractions
        );
    }
    println!("cache directory: {}", dir.display());
    Ok(())
}

fn cmd_run(config: &Path, out: &Path, workers: usize, cache: Option<PathBuf>) -> Result<()> {
    let started = std::time::Instant::now();
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    let cfg = load_config(config)?;
    let dir = cache::cache_dir(cache);
    let (store, _) = cache::ensure_store(&cfg, &dir, false)?;
    let records = run_experiment(&cfg, &store).map_err(|e| anyhow::anyhow!("{e}"))?;
    let policy_order: Vec<String> = {
        let mut seen = Vec::new();
        for p in &cfg.policies {
            let label = p.label();
            if !seen.contains(&label) {
                seen.push(label);
            }
        }
        seen
    };
    let rows = summarize(&records, &policy_order);
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let trials_path = out.join("trials.csv");
    let summary_path = out.join("summary.csv");
    output::write_trials(&trials_path, &records)?;
    output::write_summary(&summary_path, &rows)?;
    let manifest_path = out.join("manifest.json");
    output::write_manifest(
        &manifest_path,
        &cfg,
        workers,
        started.elapsed().as_secs_f64(),
        &trials_path,
        &summary_path,
    )?;
    println!(
        "wrote {} trial rows and {} summary rows to {}",
        records.len(),
        rows.len(),
        out.display()
    );
    Ok(())
}

fn cmd_report(dir: &Path, format: ReportFormat) -> Result<()> {
    let rendered = match format {
        ReportFormat::Table => report::render_table(dir)?,
        ReportFormat::Csv => report::render_csv(dir)?,
    };
    print!("{rendered}");
    Ok(())
}
