use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinetic_lab::config::{ExperimentConfig, ExperimentKind};
use kinetic_lab::{plots, run, LabError, RunOptions};

#[derive(Parser)]
#[command(
    name = "kinlab",
    version,
    about = "Disordered lattice fermions: experiments and kinetic-limit checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Replace an existing run and ignore the time budget.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a wave packet for each coupling and check unitarity.
    Evolve,
    /// Disorder-averaged momentum density at t = T/η².
    Density,
    /// Exact, RK4 and collision-history solutions of the Boltzmann equation.
    Boltzmann,
    /// Density of states of the energy shells.
    Dos,
    /// Enumerate and classify contraction graphs.
    Diagrams,
    /// Monte Carlo against pairing-amplitude sums.
    Wick,
    /// Quasifreeness gap against η.
    Quasifree,
    /// Microscopic density against the Boltzmann prediction.
    Converge,
    /// Parameter schedule arithmetic.
    Schedule,
    /// Run the experiments listed in the config.
    Suite,
    /// Write a gnuplot script for a run directory.
    Plot { dir: PathBuf },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, LabError> {
    let (label, kinds): (&str, Vec<ExperimentKind>) = match &cli.command {
        Command::Plot { dir } => {
            let path = plots::emit_plots(dir)?;
            println!("{}", path.display());
            return Ok(0);
        }
        Command::Suite => ("suite", load(cli)?.experiments),
        Command::Evolve => ("evolve", vec![ExperimentKind::Evolve]),
        Command::Density => ("density", vec![ExperimentKind::Density]),
        Command::Boltzmann => ("boltzmann", vec![ExperimentKind::Boltzmann]),
        Command::Dos => ("dos", vec![ExperimentKind::Dos]),
        Command::Diagrams => ("diagrams", vec![ExperimentKind::Diagrams]),
        Command::Wick => ("wick", vec![ExperimentKind::Wick]),
        Command::Quasifree => ("quasifree", vec![ExperimentKind::Quasifree]),
        Command::Converge => ("converge", vec![ExperimentKind::Converge]),
        Command::Schedule => ("schedule", vec![ExperimentKind::Schedule]),
    };
    let cfg = load(cli)?;
    let summary = run(label, &kinds, &cfg, RunOptions { force: cli.force })?;
    for c in &summary.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("{}", summary.dir.display());
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("kinlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
