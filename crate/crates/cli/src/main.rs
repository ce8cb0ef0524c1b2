use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use kitaev_thermal::config::{Command, RunConfig};
use kitaev_thermal::runner::{run, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Solve,
    SweepCrossover,
    Correlations,
    Oracle,
    Verify,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Solve => Command::Solve,
            CommandArg::SweepCrossover => Command::SweepCrossover,
            CommandArg::Correlations => Command::Correlations,
            CommandArg::Oracle => Command::Oracle,
            CommandArg::Verify => Command::Verify,
        }
    }
}

/// Variational thermal states of the periodic Kitaev ring.
#[derive(Debug, Parser)]
#[command(name = "kitaev-thermal", version)]
struct Cli {
    #[arg(value_enum)]
    command: CommandArg,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: config `output_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Checkpoint whose converged cells are reused instead of re-solved.
    #[arg(long)]
    resume: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<NonZeroUsize>,

    /// Write optimizer traces to traces.csv (solve only).
    #[arg(long)]
    trace: bool,
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };

    let config = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let options = RunOptions {
        command: cli.command.into(),
        seed: cli.seed,
        out_dir: cli.out,
        resume: cli.resume,
        workers: cli.workers.map(NonZeroUsize::get),
        record_trace: cli.trace,
    };

    let report = match run(&config, &options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_usage() { EXIT_USAGE } else { EXIT_RUNTIME });
        }
    };

    for c in &report.checks {
        let status = if c.failed == 0 { "PASS" } else { "FAIL" };
        println!("{status} {}: {} passed, {} failed (worst {:e})", c.name, c.passed, c.failed, c.worst);
    }
    for f in &report.failures {
        eprintln!("warning: {f}");
    }
    println!(
        "{}: {} cells, {} failures, wrote {} to {}",
        report.command.as_str(),
        report.cells,
        report.failures.len(),
        report.files.join(", "),
        report.out_dir.display()
    );

    if report.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}
