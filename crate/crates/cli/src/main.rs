use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cvst_cli::commands::{self, EstimateInput};
use cvst_cli::config::{ConfigError, ExperimentConfig, Overrides};
use cvst_cli::figures::Figure;

/// Exit status when `compare` finds a violated threshold.
const EXIT_THRESHOLD: u8 = 3;
/// Exit status for an invalid config.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "cvst", version, about = "Cross K- and J-statistics experiments")]
struct Cli {
    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "CVST_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest t of the grid `t_k = t_max · k / t_steps`.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    replicates: Option<u32>,
    /// Pixel side length.
    #[arg(long)]
    h: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, t_max: self.t_max, t_steps: self.t_steps, replicates: self.replicates, h: self.h }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write per-replicate realizations and coverage functions.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Estimate curves and envelopes from a config or a `simulate` directory.
    Estimate {
        #[arg(long, required_unless_present = "input", conflicts_with = "input")]
        config: Option<PathBuf>,
        /// Output directory of `simulate`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write the closed-form oracle curves of a config.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare estimated envelopes with oracle curves.
    Compare {
        /// Output directory of `estimate`.
        #[arg(long)]
        estimate: PathBuf,
        /// Output directory of `oracle`; defaults to the estimate directory.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Config whose `[compare]` thresholds apply; defaults to the
        /// estimate's config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the report tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in figure experiments.
    ReproduceFigure {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn load(path: &Path, run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&run.overrides())?;
    Ok(cfg)
}

fn out_dir(out: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    out.or_else(|| cfg.output.dir.clone()).context("no output directory: pass --out or set output.dir")
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate { config, out, run } => {
            let cfg = load(&config, &run)?;
            commands::simulate(&cfg, &out_dir(out, &cfg)?)?;
        }
        Command::Estimate { config, input, out, run } => match (config, input) {
            (Some(config), _) => {
                let cfg = load(&config, &run)?;
                let out = out_dir(out, &cfg)?;
                commands::estimate(EstimateInput::Config(Box::new(cfg)), &out)?;
            }
            (None, Some(input)) => {
                let out = out.context("--out is required with --input")?;
                commands::estimate(EstimateInput::Realizations(input, run.overrides()), &out)?;
            }
            (None, None) => unreachable!("clap requires one of --config and --input"),
        },
        Command::Oracle { config, out, run } => {
            let cfg = load(&config, &run)?;
            commands::oracle(&cfg, &out_dir(out, &cfg)?)?;
        }
        Command::Compare { estimate, oracle, config, out } => {
            let thresholds = config.map(|p| ExperimentConfig::load(&p)).transpose()?;
            let oracle = oracle.unwrap_or_else(|| estimate.clone());
            let report = commands::compare(&estimate, &oracle, thresholds.as_ref(), out.as_deref())?;
            print!("{}", report.render());
            if !report.passed {
                return Ok(ExitCode::from(EXIT_THRESHOLD));
            }
        }
        Command::ReproduceFigure { figure, out, run } => {
            let mut cfg = figure.config();
            cfg.apply(&run.overrides())?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("figure-{}", figure.name())));
            commands::reproduce_figure(figure.name(), &cfg, &out, Figure::defaults(&cfg))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
