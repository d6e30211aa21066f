//! Command-line front end: solve a case, run sweeps, analyse a run directory.
//!
//! `COSSERAT_SEED` is reserved for stochastic components; nothing reads it
//! yet since every computation is deterministic.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use cosserat_ocp::experiments::{
    chi1_sweep, material_sweep, run_case, wavespeed_from_dir, ExperimentConfig, Profile,
};

#[derive(Parser)]
#[command(version, about = "Optimal control of a planar Cosserat rod")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Grid and time step: `fine` (N=100, dt=1e-5 s) or `desk` (N=50, dt=2e-5 s).
    #[arg(long, global = true)]
    profile: Option<Profile>,

    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and write its log, snapshots and final control.
    Run { config: PathBuf },
    /// Run the material and running-cost sweeps listed in the config.
    Sweep { config: PathBuf },
    /// Fit the wave speed of a finished run's final control.
    Wavespeed { run_dir: PathBuf },
}

fn load(path: &Path, profile: Option<Profile>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(p) = profile {
        config = config.with_profile(p);
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli_out: &Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(config.case.to_string()))
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let config = load(config, cli.profile)?;
            let out = out_dir(&cli.out, &config);
            let run = run_case(&config, Some(&out))
                .with_context(|| format!("{} case, output in {}", config.case, out.display()))?;
            let (first, last) = run.tip_distances();
            println!(
                "{}: {} iterations, tip distance {:.4} m -> {:.4} m, output in {}",
                config.case,
                run.solution.log.records.len(),
                first,
                last,
                out.display()
            );
        }
        Command::Sweep { config } => {
            let config = load(config, cli.profile)?;
            if config.sweep.materials.is_empty() && config.sweep.chi1.is_empty() {
                bail!("config has no [sweep] materials or chi1 list");
            }
            let out = out_dir(&cli.out, &config);
            if !config.sweep.materials.is_empty() {
                let rows = material_sweep(&config, Some(&out.join("materials")), cli.workers)?;
                println!("E [Pa], rho [kg/m^3], c [m/s], coeff, r2, direction");
                for r in &rows {
                    println!(
                        "{}, {}, {:.4}, {:.4}, {:.3}, {:+}",
                        r.youngs_modulus,
                        r.density,
                        r.speed,
                        r.coefficient,
                        r.r2,
                        r.direction.sign()
                    );
                }
            }
            if !config.sweep.chi1.is_empty() {
                let rows = chi1_sweep(&config, Some(&out.join("chi1")), cli.workers)?;
                println!("chi1, direction, velocity [m/s], r2, bimodal");
                for r in &rows {
                    println!(
                        "{}, {:+}, {:.4}, {:.3}, {}",
                        r.chi1, r.direction, r.velocity, r.r2, r.bimodal
                    );
                }
            }
            info!("sweep output in {}", out.display());
        }
        Command::Wavespeed { run_dir } => {
            let row = wavespeed_from_dir(run_dir)
                .with_context(|| format!("analysing {}", run_dir.display()))?;
            println!(
                "c = {:.4} m/s, coeff = {:.4}, r2 = {:.3}, direction {:+}{}",
                row.speed,
                row.coefficient,
                row.r2,
                row.direction.sign(),
                if row.reliable() {
                    ""
                } else {
                    " (unreliable fit)"
                }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
