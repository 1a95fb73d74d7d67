//! Render a finished run directory as per-prior comparison tables or a
//! long-form CSV.
//!
//! Tables mark the best policy per budget column and, when both are
//! present, show how many times fewer errors the replanning policies make
//! than the uniform pass. A zero error mean has no finite factor; it is
//! reported as a lower bound by pretending half an error was seen.

use anyhow::{Context, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
struct Row {
    policy: String,
    b: f64,
    p0: f64,
    mean: f64,
    se: f64,
    trials: usize,
}

fn read_summary(dir: &Path) -> Result<Vec<Row>> {
    let path = dir.join("summary.csv");
    let mut reader = csv::Reader::from_path(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .with_context(|| format!("short row in {}", path.display()))
        };
        rows.push(Row {
            policy: field(0)?.to_string(),
            b: field(1)?.parse()?,
            p0: field(2)?.parse()?,
            mean: field(3)?.parse()?,
            se: field(4)?.parse()?,
            trials: field(5)?.parse()?,
        });
    }
    if rows.is_empty() {
        anyhow::bail!("{} holds no summary rows", path.display());
    }
    Ok(rows)
}

fn policies_in_order(rows: &[Row]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.policy) {
            out.push(r.policy.clone());
        }
    }
    out
}

fn sorted_values(rows: &[Row], pick: impl Fn(&Row) -> f64) -> Vec<f64> {
    let set: BTreeSet<u64> = rows.iter().map(|r| pick(r).to_bits()).collect();
    let mut vals: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

fn cell<'a>(rows: &'a [Row], policy: &str, b: f64, p0: f64) -> Option<&'a Row> {
    rows.iter()
        .find(|r| r.policy == policy && r.b == b && r.p0 == p0)
}

fn best_mean(rows: &[Row], b: f64, p0: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.b == b && r.p0 == p0)
        .map(|r| r.mean)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

pub fn render_table(dir: &Path) -> Result<String> {
    let rows = read_summary(dir)?;
    let policies = policies_in_order(&rows);
    let budgets = sorted_values(&rows, |r| r.b);
    let priors = sorted_values(&rows, |r| r.p0);
    let mut out = String::new();
    for &p0 in &priors {
        writeln!(out, "p0 = {p0} (mean weighted errors, * = best per column)")?;
        write!(out, "{:<10}", "policy")?;
        for &b in &budgets {
            write!(out, "{:>20}", format!("B={b}"))?;
        }
        writeln!(out)?;
        for policy in &policies {
            write!(out, "{policy:<10}")?;
            for &b in &budgets {
                match cell(&rows, policy, b, p0) {
                    Some(r) => {
                        let star = if Some(r.mean) == best_mean(&rows, b, p0) {
                            "*"
                        } else {
                            ""
                        };
                        write!(out, "{:>20}", format!("{:.3} ±{:.3}{}", r.mean, r.se, star))?;
                    }
                    None => write!(out, "{:>20}", "-")?,
                }
            }
            writeln!(out)?;
        }
        if policies.iter().any(|p| p == "na") {
            for policy in policies.iter().filter(|p| p.starts_with("olfc")) {
                write!(out, "{:<10}", format!("na/{policy}"))?;
                for &b in &budgets {
                    let text = match (cell(&rows, "na", b, p0), cell(&rows, policy, b, p0)) {
                        (Some(na), Some(ol)) if ol.mean > 0.0 => {
                            format!("{:.2}x", na.mean / ol.mean)
                        }
                        (Some(na), Some(_)) => format!("\u{2265}{:.2}x", na.mean / 0.5),
                        _ => "-".to_string(),
                    };
                    write!(out, "{text:>20}")?;
                }
                writeln!(out)?;
            }
        }
        writeln!(out)?;
    }
    Ok(out)
}

pub fn render_csv(dir: &Path) -> Result<String> {
    let rows = read_summary(dir)?;
    let policies = policies_in_order(&rows);
    let budgets = sorted_values(&rows, |r| r.b);
    let priors = sorted_values(&rows, |r| r.p0);
    let mut out = String::from("p0,B,policy,mean_errors,std_err,trials,best\n");
    for &p0 in &priors {
        for &b in &budgets {
            let best = best_mean(&rows, b, p0);
            for policy in &policies {
                if let Some(r) = cell(&rows, policy, b, p0) {
                    writeln!(
                        out,
                        "{p0},{b},{policy},{},{},{},{}",
                        r.mean,
                        r.se,
                        r.trials,
                        if Some(r.mean) == best { 1 } else { 0 }
                    )?;
                }
            }
        }
    }
    Ok(out)
}
