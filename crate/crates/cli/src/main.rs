use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spingauge::commands::{self, RunContext, RunOutcome};
use spingauge::config::{parse_config, ParsedConfig};
use spingauge::dynamics::DEFAULT_DENSE_CUTOFF;
use spingauge::selfcheck::{format_table, run_selfcheck};
use spingauge::Error;

#[derive(Parser)]
#[command(name = "spingauge", version, about = "Spin-gauge lattice cQED simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest dimension diagonalized densely.
    #[arg(long, global = true, default_value_t = DEFAULT_DENSE_CUTOFF)]
    dense_cutoff: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Enumerate the configured basis.
    Basis,
    /// Diagonalize the configured Hamiltonian.
    Spectrum,
    /// Derive the effective Hamiltonian from the primitive theory and compare.
    ValidateEffective,
    /// Prepare a state and evolve it.
    Evolve,
    /// Ramsey interferometry of a meson.
    Ramsey,
    /// Flux-tube breaking time series.
    Break,
    /// Run the built-in invariant checks.
    Selfcheck,
}

fn load(path: Option<&PathBuf>) -> Result<ParsedConfig, Error> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(ParsedConfig {
            config: Default::default(),
            warnings: Vec::new(),
        }),
    }
}

fn run(cli: &Cli) -> Result<Option<RunOutcome>, Error> {
    if let Command::Selfcheck = cli.command {
        let results = run_selfcheck();
        print!("{}", format_table(&results));
        if results.iter().all(|r| r.passed) {
            return Ok(None);
        }
        return Err(Error::InvalidPlan("selfcheck failed".into()));
    }
    let parsed = load(cli.config.as_ref())?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let ctx = RunContext {
        out: cli.out.clone(),
        dense_cutoff: cli.dense_cutoff,
    };
    let outcome = match cli.command {
        Command::Basis => commands::run_basis(&parsed, &ctx)?,
        Command::Spectrum => commands::run_spectrum(&parsed, &ctx)?,
        Command::ValidateEffective => commands::run_validate_effective(&parsed, &ctx)?,
        Command::Evolve => commands::run_evolve(&parsed, &ctx)?,
        Command::Ramsey => commands::run_ramsey_command(&parsed, &ctx)?,
        Command::Break => commands::run_break_command(&parsed, &ctx)?,
        Command::Selfcheck => unreachable!(),
    };
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(Some(outcome)) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(Error::Config(errors)) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
