//! Implementations of the command-line subcommands.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bounds::{bound_report, BoundReport};
use crate::config::{preset, ConfigError, ExperimentConfig};
use crate::engine::{run_experiment, ExperimentResult};
use crate::env::RewardFamily;
use crate::policy::{PolicySpec, TieBreakMode};
use crate::report;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] crate::error::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Command-line settings that replace config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub horizon: Option<u64>,
    pub stride: Option<u64>,
    pub tie_break: Option<TieBreakMode>,
    pub reward_model: Option<RewardFamily>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replications {
            cfg.replications = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.stride {
            cfg.stride = Some(v);
        }
        if let Some(v) = self.tie_break {
            cfg.tie_break = v;
        }
        if let Some(v) = self.reward_model {
            cfg.reward_model = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = Some(v.clone());
        }
        cfg.validate()
    }
}

/// What a simulation command produced.
#[derive(Debug)]
pub struct RunOutput {
    pub digest: String,
    pub results: Vec<ExperimentResult>,
    pub files: Vec<PathBuf>,
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn simulate(
    cfg: &ExperimentConfig,
    policies: &[PolicySpec],
    workers: usize,
) -> Result<Vec<ExperimentResult>, CommandError> {
    let network = cfg.network();
    let opts = cfg.sim_options();
    let digest = cfg.digest();
    policies
        .iter()
        .map(|policy| {
            run_experiment(
                &network,
                policy,
                cfg.horizon,
                cfg.replications,
                cfg.seed,
                &opts,
                workers,
                Some(digest.clone()),
            )
            .map_err(CommandError::from)
        })
        .collect()
}

/// Runs every configured policy and writes one table per policy.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput, CommandError> {
    let results = simulate(cfg, &cfg.policies, workers)?;
    let files = report::write_run(
        &output_dir(cfg),
        "run",
        &cfg.to_canonical_toml(),
        &results,
        workers,
    )?;
    Ok(RunOutput {
        digest: cfg.digest(),
        results,
        files,
    })
}

/// Runs a named reference setup (`paper-1` or `paper-2`).
pub fn reproduce(
    setup: &str,
    overrides: &Overrides,
    workers: usize,
) -> Result<RunOutput, CommandError> {
    let mut cfg = preset(setup)?;
    overrides.apply(&mut cfg)?;
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(PathBuf::from("out").join(setup));
    }
    let results = simulate(&cfg, &cfg.policies, workers)?;
    let files = report::write_run(
        &output_dir(&cfg),
        &format!("reproduce {setup}"),
        &cfg.to_canonical_toml(),
        &results,
        workers,
    )?;
    Ok(RunOutput {
        digest: cfg.digest(),
        results,
        files,
    })
}

/// Bound reports for every configured policy that has a trade-off parameter.
pub fn bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>, CommandError> {
    let network = cfg.network();
    let mut etas: Vec<f64> = cfg.policies.iter().filter_map(PolicySpec::eta).collect();
    etas.dedup();
    if etas.is_empty() {
        etas.push(0.0);
    }
    if cfg.horizon < 2 {
        return Err(ConfigError {
            line: None,
            message: "bounds need a horizon of at least 2 slots".into(),
        }
        .into());
    }
    etas.iter()
        .map(|&eta| bound_report(&network, eta, cfg.horizon).map_err(CommandError::from))
        .collect()
}

/// Runs the age/UCB policy for every `eta` on one network and writes the
/// per-`eta` tables plus a `sweep.csv` summary.
pub fn sweep(
    cfg: &ExperimentConfig,
    etas: &[f64],
    workers: usize,
) -> Result<RunOutput, CommandError> {
    let policies: Vec<PolicySpec> = etas.iter().map(|&eta| PolicySpec::laes(eta)).collect();
    let mut swept = cfg.clone();
    swept.policies = policies.clone();
    swept.validate()?;
    let results = simulate(&swept, &policies, workers)?;
    let dir = output_dir(&swept);
    let mut files =
        report::write_run(&dir, "sweep", &swept.to_canonical_toml(), &results, workers)?;

    let network = swept.network();
    let mut summary = String::from(
        "eta,mean_cumulative_regret,stderr_cumulative_regret,mean_running_avg_age,stderr_running_avg_age,age_bound,regret_bound\n",
    );
    for (eta, result) in etas.iter().zip(&results) {
        let report = bound_report(&network, *eta, swept.horizon.max(2))?;
        summary.push_str(&format!(
            "{eta},{},{},{},{},{},{}\n",
            result.cumulative_regret.last_mean(),
            result.cumulative_regret.last_stderr(),
            result.running_avg_age.last_mean(),
            result.running_avg_age.last_stderr(),
            report.age_bound,
            report
                .regret_bound
                .map_or_else(|| "undefined".to_string(), |b| b.to_string()),
        ));
    }
    let path = dir.join("sweep.csv");
    fs::write(&path, summary)?;
    files.push(path);
    Ok(RunOutput {
        digest: swept.digest(),
        results,
        files,
    })
}

/// Table files among `files`.
pub fn tables(files: &[PathBuf]) -> impl Iterator<Item = &Path> {
    files
        .iter()
        .map(PathBuf::as_path)
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
}
