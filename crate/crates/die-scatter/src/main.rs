//! Thin command-line front end; all logic lives in the library.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use die_scatter::cli::{
    cmd_bench, cmd_plan, cmd_solve, cmd_spectrum, cmd_validate, format_bench, format_plan,
    Pipeline, RunConfig, ValidationOptions,
};
use die_scatter::Error;

#[derive(Parser)]
#[command(name = "die-scatter", version, about = "2D electromagnetic scattering via the domain integral equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Force the reproducible single-threaded path (it is also the default;
    /// the flag is recorded in the manifest).
    #[arg(long)]
    deterministic: bool,
    /// Override the pipeline: plain | regularized | regularized-deflated | deflated.
    #[arg(long)]
    pipeline: Option<String>,
    /// Override the GMRES restart.
    #[arg(long)]
    restart: Option<usize>,
    /// Override the deflation count.
    #[arg(long)]
    r: Option<usize>,
    /// Override the eigs tolerance.
    #[arg(long)]
    eigs_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scattering problem and write field/convergence artifacts.
    Solve(CommonArgs),
    /// Dense eigenvalue diagnostics of the configured system.
    Spectrum(CommonArgs),
    /// Resource planning for a memory budget (uses the config `plan` section).
    Plan(CommonArgs),
    /// Run the validation suites (analytic cylinder, FFT vs dense, vacuum).
    Validate {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fair-memory iteration/time comparison across pipelines.
    Bench(CommonArgs),
}

fn parse_pipeline(s: &str) -> Result<Pipeline, Error> {
    match s {
        "plain" => Ok(Pipeline::Plain),
        "regularized" => Ok(Pipeline::Regularized),
        "regularized-deflated" => Ok(Pipeline::RegularizedDeflated),
        "deflated" => Ok(Pipeline::Deflated),
        other => Err(Error::InvalidConfig(format!("unknown pipeline `{other}`"))),
    }
}

fn load(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(p) = &args.pipeline {
        config.pipeline = parse_pipeline(p)?;
    }
    if let Some(k) = args.restart {
        config.krylov.restart = k;
    }
    if let Some(r) = args.r {
        config.r_override = Some(r);
    }
    if let Some(t) = args.eigs_tol {
        config.eigs_tol = t;
    }
    Ok(config)
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Solve(args) => {
            let config = load(&args)?;
            let summary = cmd_solve(&config, &args.out, args.deterministic)?;
            println!(
                "converged in {} iterations (restart {}, r {}), final residual {:.3e}",
                summary.iterations, summary.restart, summary.r, summary.final_residual
            );
            println!(
                "off-line {:.2}s, on-line {:.2}s; artifacts in {}",
                summary.offline_seconds,
                summary.online_seconds,
                args.out.display()
            );
            Ok(())
        }
        Command::Spectrum(args) => {
            let config = load(&args)?;
            let summary = cmd_spectrum(&config, &args.out)?;
            println!(
                "{} eigenvalues; deflation radius {:.6}; {} outside; wedge violations {}",
                summary.dimension,
                summary.deflation_radius,
                summary.outside_radius,
                summary.wedge_violations
            );
            Ok(())
        }
        Command::Plan(args) => {
            let config = load(&args)?;
            let plan = cmd_plan(&config, &args.out)?;
            print!("{}", format_plan(&plan));
            Ok(())
        }
        Command::Validate { out } => {
            let report = cmd_validate(&out, &ValidationOptions::default())?;
            for suite in &report.suites {
                println!(
                    "{}: {} ({})",
                    suite.name,
                    if suite.passed { "PASS" } else { "FAIL" },
                    suite.detail
                );
            }
            Ok(())
        }
        Command::Bench(args) => {
            let config = load(&args)?;
            let report = cmd_bench(&config, &args.out)?;
            print!("{}", format_bench(&report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
