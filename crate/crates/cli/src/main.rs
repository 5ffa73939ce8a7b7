use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rise_cli::generate::{generate, RecoveryShape, SyntheticSpec};
use rise_cli::{run, run_stages, CliError, PipelineConfig, RunManifest, Stage};

#[derive(Debug, Parser)]
#[command(name = "rise", version, about = "Recovery-informed forecasting pipeline")]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, default_value = "rise.toml")]
    config: PathBuf,
    /// Overrides the seed in the config (or the generator seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset and a matching config to --out.
    Generate {
        #[arg(long, default_value_t = 20)]
        destinations: usize,
        #[arg(long, default_value_t = 8)]
        years: u32,
        /// Month arrivals collapse, YYYY-MM.
        #[arg(long, default_value = "2020-02")]
        break_month: String,
        /// linear, quadratic or logistic.
        #[arg(long, default_value = "linear")]
        shape: String,
        /// Share of the counterfactual reached at the end of recovery.
        #[arg(long, default_value_t = 0.7)]
        suppression: f64,
        /// Seasonal amplitude multiplier; 0 disables seasonality.
        #[arg(long, default_value_t = 1.0)]
        seasonality: f64,
    },
    /// Run every stage.
    Run,
    /// Run one stage against cached upstream outputs.
    Stage {
        /// base, reference, recovery or evaluate.
        name: String,
    },
    /// Score existing forecasts (the evaluate stage).
    Evaluate,
}

fn load(cli: &Cli) -> Result<(PipelineConfig, PathBuf), CliError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn report(manifest: &RunManifest, out: &Path) {
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for s in &manifest.stages {
        eprintln!("{:<10} {:>8.2}s", s.stage, s.seconds);
    }
    eprintln!("{} output file(s) in {}", manifest.outputs.len(), out.display());
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { destinations, years, break_month, shape, suppression, seasonality } => {
            let out = cli.out.clone().ok_or_else(|| CliError::Config("generate needs --out".into()))?;
            let spec = SyntheticSpec {
                destinations: *destinations,
                years: *years,
                break_month: break_month.parse().map_err(|e| CliError::Config(format!("--break-month: {e}")))?,
                recovery_shape: shape.parse::<RecoveryShape>()?,
                suppression: *suppression,
                seasonality: *seasonality,
                ..SyntheticSpec::default()
            };
            let data = generate(&spec, cli.seed.unwrap_or(0))?;
            for path in data.write(&out)? {
                println!("{}", path.display());
            }
        }
        Command::Run => {
            let (cfg, out) = load(cli)?;
            report(&run(&cfg, &out)?, &out);
        }
        Command::Stage { name } => {
            let stage: Stage = name.parse()?;
            let (cfg, out) = load(cli)?;
            report(&run_stages(&cfg, &out, &[stage])?, &out);
        }
        Command::Evaluate => {
            let (cfg, out) = load(cli)?;
            report(&run_stages(&cfg, &out, &[Stage::Evaluate])?, &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
