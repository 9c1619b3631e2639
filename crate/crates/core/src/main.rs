use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agesched::commands::{self, CommandError, Overrides};
use agesched::config::{preset, ExperimentConfig};
use agesched::env::RewardFamily;
use agesched::policy::TieBreakMode;
use agesched::report;

/// Age-efficient wireless scheduling experiments.
#[derive(Parser)]
#[command(name = "agesched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy of a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a reference setup: paper-1 (5 links, non-fading) or paper-2 (10 links, fading).
    Reproduce {
        setup: String,
        #[command(flatten)]
        common: Common,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Print the closed-form bounds for a config file (or a reference setup name).
    Bounds {
        config: String,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Run the age/UCB policy over a grid of eta values on one network.
    Sweep {
        config: PathBuf,
        /// Comma-separated eta values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 10.0, 50.0, 100.0, 200.0])]
        etas: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    stride: Option<u64>,
    /// Worker threads; does not affect results.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_tie_break)]
    tie_break: Option<TieBreakMode>,
    #[arg(long, value_parser = parse_reward_model)]
    reward_model: Option<RewardFamily>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replications: self.replications,
            horizon: self.horizon,
            stride: self.stride,
            tie_break: self.tie_break,
            reward_model: self.reward_model,
            out_dir: self.out_dir.clone(),
        }
    }
}

fn parse_tie_break(s: &str) -> Result<TieBreakMode, String> {
    s.parse()
}

fn parse_reward_model(s: &str) -> Result<RewardFamily, String> {
    s.parse()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(path: &std::path::Path, overrides: &Overrides) -> Result<ExperimentConfig, CommandError> {
    let mut cfg = ExperimentConfig::from_path(path).map_err(|mut e| {
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn print_run(out: &commands::RunOutput) {
    for result in &out.results {
        println!(
            "{:<14} regret {:>10.2} ± {:<8.2} avg age {:>10.2} ± {:.2}",
            result.metadata.policy.label(),
            result.cumulative_regret.last_mean(),
            result.cumulative_regret.last_stderr(),
            result.running_avg_age.last_mean(),
            result.running_avg_age.last_stderr(),
        );
    }
    println!("config digest {}", out.digest);
    for file in &out.files {
        println!("wrote {}", file.display());
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = load(&config, &common.overrides())?;
            print_run(&commands::run(&cfg, common.workers)?);
        }
        Command::Reproduce {
            setup,
            common,
            print_config,
        } => {
            if print_config {
                let mut cfg = preset(&setup)?;
                common.overrides().apply(&mut cfg)?;
                print!("{}", cfg.to_canonical_toml());
                return Ok(());
            }
            print_run(&commands::reproduce(
                &setup,
                &common.overrides(),
                common.workers,
            )?);
        }
        Command::Bounds { config, horizon } => {
            let overrides = Overrides {
                horizon,
                ..Default::default()
            };
            let cfg = match preset(&config) {
                Ok(mut cfg) => {
                    overrides.apply(&mut cfg)?;
                    cfg
                }
                Err(_) => load(config.as_ref(), &overrides)?,
            };
            let reports = commands::bounds(&cfg)?;
            print!("{}", report::format_bounds(&config, &reports, cfg.horizon));
        }
        Command::Sweep {
            config,
            etas,
            common,
        } => {
            let cfg = load(&config, &common.overrides())?;
            print_run(&commands::sweep(&cfg, &etas, common.workers)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CommandError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
