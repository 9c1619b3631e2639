//! Result tables and run metadata.
//!
//! A table is comma-separated text: a block of `# key: value` lines, one
//! header row, then one row per recorded slot. Tables carry nothing that
//! varies between identical runs (no timestamps, no worker count), so reruns
//! are byte-identical. Those details go to the `metadata.json` sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::BoundReport;
use crate::engine::ExperimentResult;

/// File name of a policy's table.
pub fn table_file_name(result: &ExperimentResult) -> String {
    format!("{}.csv", result.metadata.policy.label())
}

/// Column names of a table for `num_links` links.
pub fn table_header(num_links: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "slot",
        "mean_cumulative_regret",
        "stderr_cumulative_regret",
        "mean_running_avg_age",
        "stderr_running_avg_age",
        "mean_total_age",
        "stderr_total_age",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=num_links).map(|n| format!("delivery_ratio_{n}")));
    cols
}

pub fn write_table<W: Write>(mut out: W, result: &ExperimentResult) -> io::Result<()> {
    let meta = &result.metadata;
    writeln!(out, "# policy: {}", meta.policy.label())?;
    if let Some(eta) = meta.eta {
        writeln!(out, "# eta: {eta}")?;
    }
    if let Some(digest) = &meta.config_digest {
        writeln!(out, "# config_digest: {digest}")?;
    }
    writeln!(out, "# seed: {}", meta.master_seed)?;
    writeln!(out, "# replications: {}", meta.replications)?;
    writeln!(out, "# horizon: {}", meta.horizon)?;
    writeln!(out, "# stride: {}", meta.stride)?;
    writeln!(out, "# generator: {}", meta.generator)?;
    writeln!(out, "# reward_model: {}", meta.reward_model.name())?;
    writeln!(out, "# tie_break: {}", meta.tie_break.name())?;
    writeln!(
        out,
        "# delivery_ratio: {}",
        match meta.delivery_ratio {
            crate::engine::DeliveryRatio::Delivered => "delivered",
            crate::engine::DeliveryRatio::Scheduled => "scheduled",
        }
    )?;
    writeln!(
        out,
        "{}",
        table_header(result.delivery_ratio.len()).join(",")
    )?;

    let mut line = String::new();
    for (row, slot) in result.slots.iter().enumerate() {
        use std::fmt::Write as _;
        line.clear();
        write!(line, "{slot}").unwrap();
        for stats in [
            &result.cumulative_regret,
            &result.running_avg_age,
            &result.total_age,
        ] {
            write!(line, ",{},{}", stats.mean[row], stats.stderr[row]).unwrap();
        }
        for link in &result.delivery_ratio {
            write!(line, ",{}", link.mean[row]).unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Sidecar describing a run; the only output allowed to vary between reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub generator: String,
    pub build_version: String,
    pub workers: usize,
    pub tables: Vec<String>,
    pub created_unix_secs: u64,
}

/// Writes one table per result plus `config.toml` and `metadata.json`.
///
/// `config.toml` holds exactly the canonical text whose hash is the digest.
pub fn write_run(
    dir: &Path,
    command: &str,
    canonical_config: &str,
    results: &[ExperimentResult],
    workers: usize,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut tables = Vec::new();
    for result in results {
        let name = table_file_name(result);
        let path = dir.join(&name);
        let mut buf = Vec::new();
        write_table(&mut buf, result)?;
        fs::write(&path, buf)?;
        tables.push(name);
        written.push(path);
    }
    let config_path = dir.join("config.toml");
    fs::write(&config_path, canonical_config)?;
    written.push(config_path);

    let first = results.first();
    let meta = RunMetadata {
        command: command.to_string(),
        config_digest: crate::config::digest_of(canonical_config.as_bytes()),
        seed: first.map_or(0, |r| r.metadata.master_seed),
        generator: crate::env::GENERATOR_NAME.to_string(),
        build_version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        tables,
        created_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let meta_path = dir.join("metadata.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).map_err(io::Error::other)? + "\n",
    )?;
    written.push(meta_path);
    Ok(written)
}

/// Human-readable bound table.
pub fn format_bounds(label: &str, reports: &[BoundReport], horizon: u64) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "bounds for {label} (T = {horizon})").unwrap();
    writeln!(
        out,
        "{:>10}  {:>14}  {:>22}  {:>16}  two_link (period, weak avg, strong avg)",
        "eta", "age_bound", "regret_bound", "fading_age_bound"
    )
    .unwrap();
    for r in reports {
        let regret = r
            .regret_bound
            .map_or_else(|| "undefined (eta=0)".to_string(), |b| format!("{b:.1}"));
        let fading = r
            .fading_age_bound
            .map_or_else(|| "n/a".to_string(), |b| format!("{b:.4e}"));
        let two = r.two_link_prediction.map_or_else(
            || "n/a".to_string(),
            |p| {
                format!(
                    "({}, {}, {:.4})",
                    p.period, p.weak_link_avg_age, p.strong_link_avg_age
                )
            },
        );
        writeln!(
            out,
            "{:>10}  {:>14}  {:>22}  {:>16}  {}",
            r.eta, r.age_bound, regret, fading, two
        )
        .unwrap();
    }
    if reports.iter().any(|r| r.fading_age_bound.is_none()) {
        writeln!(
            out,
            "note: the fading age bound needs every channel ON-probability below 1; omitted."
        )
        .unwrap();
    }
    out
}
