use std::path::PathBuf;
use std::process::ExitCode;

use chforce_cli::config::parse_list;
use chforce_cli::{cmd_converge, cmd_diagnose, cmd_run, cmd_trace, CliError, CommandOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chforce",
    version,
    about = "Forced Camassa–Holm solver in characteristic coordinates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write snapshots, diagnostics and a manifest.
    Run(Common),
    /// Refinement or continuous-dependence study.
    Converge(Common),
    /// Trace generalized characteristics from the given start points.
    Trace(Common),
    /// Recompute diagnostics from the outputs of an earlier run.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of refinement levels for `converge`.
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated start points for `trace`.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Suppress progress and check output.
    #[arg(long)]
    quiet: bool,
}

fn options(c: Common) -> Result<CommandOptions, CliError> {
    let x0 = c.x0.as_deref().map(|s| parse_list("--x0", s)).transpose()?;
    Ok(CommandOptions {
        config: c.config,
        out: c.out,
        levels: c.levels,
        x0,
        quiet: c.quiet,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => options(c).and_then(|o| cmd_run(&o)),
        Command::Converge(c) => options(c).and_then(|o| cmd_converge(&o)),
        Command::Trace(c) => options(c).and_then(|o| cmd_trace(&o)),
        Command::Diagnose(c) => options(c).and_then(|o| cmd_diagnose(&o)),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chforce: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
