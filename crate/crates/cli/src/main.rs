use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use darkdepth::simworld::ObstacleMix;
use darkdepth_cli::commands::{self, EstimateArgs};
use darkdepth_cli::config::check_estimator;
use darkdepth_cli::{CliError, CliResult, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "darkdepth", version, about = "Coded-aperture structured-light depth toolkit")]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the top-level seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the per-plane calibration set and save it.
    Calibrate,
    /// Write a synthetic training dataset.
    Generate {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the patch model.
    Train {
        /// Dataset directory written by `generate`; synthesized in memory
        /// when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Estimate depth from one PGM image.
    Estimate {
        image: PathBuf,
        #[arg(long, default_value = "tm")]
        estimator: String,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Benchtop error sweeps.
    Benchmark {
        #[command(subcommand)]
        which: Benchmark,
    },
    /// Closed-loop flights through random obstacle fields.
    Fly {
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// forest, boxes or dark_objects.
        #[arg(long)]
        mix: Option<String>,
        /// Write the scenes only.
        #[arg(long)]
        dry_run: bool,
    },
    /// TM error against projector-camera offset.
    ExtrinsicSweep,
}

#[derive(Debug, Subcommand)]
enum Benchmark {
    /// l1 error against background depth per aperture and focus.
    Apertures {
        #[arg(long)]
        estimator: Option<String>,
    },
    /// l1 error of each estimator on the benchtop grid.
    Estimators {
        /// Comma-separated estimator names.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    let out = cli.out.as_path();
    let cfg_check = |cfg: &RunConfig| cfg.validate();
    match cli.command {
        Command::Calibrate => commands::calibrate(&cfg, out),
        Command::Generate { count } => {
            if let Some(c) = count {
                cfg.datagen.count = c;
            }
            cfg_check(&cfg)?;
            commands::generate(&cfg, out)
        }
        Command::Train { data } => commands::train(&cfg, out, data.as_deref()),
        Command::Estimate {
            image,
            estimator,
            calibration,
            model,
        } => commands::estimate(
            &cfg,
            out,
            &EstimateArgs {
                image,
                estimator,
                calibration,
                model,
            },
        ),
        Command::Benchmark { which } => match which {
            Benchmark::Apertures { estimator } => {
                if let Some(e) = estimator {
                    check_estimator(&e)?;
                    cfg.benchmark.estimator = e;
                }
                commands::benchmark_apertures(&cfg, out)
            }
            Benchmark::Estimators { estimators, model } => {
                if let Some(e) = estimators {
                    cfg.benchmark.estimators = e;
                }
                if model.is_some() {
                    cfg.benchmark.model = model;
                }
                cfg_check(&cfg)?;
                commands::benchmark_estimators(&cfg, out)
            }
        },
        Command::Fly {
            density,
            trials,
            mix,
            dry_run,
        } => {
            if let Some(d) = density {
                cfg.forest.density = d;
            }
            if let Some(t) = trials {
                cfg.forest.trials = t;
            }
            if let Some(m) = mix {
                cfg.forest.mix = m.parse::<ObstacleMix>().map_err(|e| CliError::Config(e.to_string()))?;
            }
            cfg_check(&cfg)?;
            commands::fly(&cfg, out, dry_run)
        }
        Command::ExtrinsicSweep => commands::extrinsic_sweep(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("darkdepth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
