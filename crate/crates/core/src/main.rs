use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use aniso_qft::cli::{self, CliError, Command, OutputFormat, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Trajectory of a single mode at the output times
    Modes,
    /// Final S, U, V over a grid of modes
    Spectrum,
    /// Energy-momentum tensor at the output times
    Tensor,
    /// Run the verification suite
    Verify,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Vacuum particle creation in anisotropic backgrounds.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    command: Cmd,
    /// Configuration document (TOML, dotted keys)
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to output.path, then stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format; defaults to output.format, then csv
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to `threads`, then all cores
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Modes => Command::Modes,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Tensor => Command::Tensor,
        Cmd::Verify => Command::Verify,
    };
    let overrides = Overrides {
        output: args.output,
        format: args.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }),
        threads: args.threads,
    };
    let result = cli::load_config(&args.config, &overrides).and_then(|cfg| cli::run(command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("aniso-qft: {err}");
            match err {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Failed(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
