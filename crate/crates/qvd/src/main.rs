use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qvd::harness::config::load_config;
use qvd::harness::report::{to_json_bytes, write_atomic};
use qvd::harness::runner::{
    report_moments_from_config, resolve_threads, run_approximate, run_clt_cov, run_directory,
    run_experiment,
};
use qvd::{QvdError, Result};

/// Numerical laboratory for kernel-weighted channel approximation on the
/// simplex lattice.
#[derive(Parser)]
#[command(name = "qvd", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to a JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to QVD_THREADS, then 1).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the closed-form vs. exact moment comparison table.
    Moments(CommonArgs),
    /// Apply the configured map's lattice approximation once.
    Approximate(CommonArgs),
    /// Run the full convergence experiment (error curve, fit, expansion).
    Convergence(CommonArgs),
    /// Build the Richardson acceleration table.
    Romberg(CommonArgs),
    /// Geodesic interpolation between two configured channels.
    Interpolate(CommonArgs),
    /// Covariance form of the fluctuation regime.
    CltCov(CommonArgs),
    /// Run every stage the config enables, including the moment report.
    Report(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Moments(a)
            | Command::Approximate(a)
            | Command::Convergence(a)
            | Command::Romberg(a)
            | Command::Interpolate(a)
            | Command::CltCov(a)
            | Command::Report(a) => a,
        }
    }
}

fn apply_seed(config: &mut qvd::harness::ExperimentConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        config.seeds.master = s;
    }
}

fn run(cli: Cli) -> Result<()> {
    let args = cli.command.common().clone();
    let mut config = load_config(&args.config)?;
    apply_seed(&mut config, args.seed);
    let threads = resolve_threads(args.threads);
    let out = args.out.as_deref();

    match cli.command {
        Command::Moments(_) => {
            let moments = config.moments.clone().ok_or_else(|| {
                QvdError::Config("config has no `moments` section".into())
            })?;
            let csv = report_moments_from_config(&moments)?;
            let dir = run_directory(&config, out);
            std::fs::create_dir_all(&dir)
                .map_err(|e| QvdError::Config(format!("cannot create {}: {e}", dir.display())))?;
            let path = dir.join("moments.csv");
            write_atomic(&path, csv.as_bytes())?;
            println!("{}", path.display());
        }
        Command::Approximate(_) => {
            let dir = run_approximate(&config, out)?;
            println!("{}", dir.display());
        }
        Command::Convergence(_) | Command::Report(_) => {
            let full = matches!(cli.command, Command::Report(_));
            let mut cfg = config;
            if !full {
                // `convergence` runs only the core stages.
                cfg.moments = None;
            }
            let dir = run_experiment(&cfg, out, threads)?;
            println!("{}", dir.display());
        }
        Command::Romberg(_) => {
            if config.romberg.is_none() {
                return Err(QvdError::Config("config has no `romberg` section".into()));
            }
            let dir = run_experiment(&config, out, threads)?;
            println!("{}", dir.join("romberg.csv").display());
        }
        Command::Interpolate(_) => {
            let ic = config.interpolation.clone().ok_or_else(|| {
                QvdError::Config("config has no `interpolation` section".into())
            })?;
            config.validate()?;
            let a = ic.channel_a.build(config.dimension)?;
            let b = ic.channel_b.build(config.dimension)?;
            let results: Vec<qvd::applications::InterpolationResult> = ic
                .t_grid
                .iter()
                .map(|&t| qvd::applications::channel_geomean(&a, &b, t, true))
                .collect::<Result<_>>()?;
            let dir = run_directory(&config, out);
            std::fs::create_dir_all(&dir)
                .map_err(|e| QvdError::Config(format!("cannot create {}: {e}", dir.display())))?;
            let path = dir.join("interpolation.json");
            write_atomic(&path, &to_json_bytes(&results)?)?;
            println!("{}", path.display());
        }
        Command::CltCov(_) => {
            let dir = run_clt_cov(&config, out)?;
            println!("{}", dir.join("clt_covariance.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
