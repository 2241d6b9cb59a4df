//! Command-line front end: configuration, the four commands and their output.
//!
//! ```text
//! aniso-qft <modes|spectrum|tensor|verify> --config <path> [--output <path>] [--format csv|json]
//! ```

pub mod commands;
pub mod config;
pub mod table;
pub mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use commands::{cmd_modes, cmd_spectrum, cmd_tensor};
pub use config::{parse_config, ConfigError, OutputFormat, RunConfig};
pub use table::Table;
pub use verify::{cmd_verify, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Modes,
    Spectrum,
    Tensor,
    Verify,
}

/// Command-line overrides applied on top of the configuration document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    /// The run completed but some result fails its own criterion.
    #[error("{0}")]
    Failed(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads, validates and applies overrides.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut cfg = parse_config(&text)?;
    if let Some(p) = &overrides.output {
        cfg.output_path = Some(p.clone());
    }
    if let Some(f) = overrides.format {
        cfg.output_format = f;
    }
    if let Some(t) = overrides.threads {
        if t == 0 {
            return Err(ConfigError::Invalid {
                field: "threads".into(),
                message: "must be at least 1".into(),
            }
            .into());
        }
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.output_path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Runs one command and writes its output. Non-converged tensor rows and
/// failed verification checks are written, then reported as `Failed`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let target = cfg
        .output_path
        .as_ref()
        .map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string());
    let write_err = |source| CliError::Io {
        path: target.clone(),
        source,
    };
    if command == Command::Verify {
        let report = commands::with_workers(cfg, || cmd_verify(cfg))?;
        let mut out = sink(cfg)?;
        report
            .write(cfg.output_format, &mut out)
            .map_err(write_err)?;
        out.flush().map_err(write_err)?;
        if !report.passed {
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| c.required && !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            return Err(CliError::Failed(format!(
                "verification failed: {}",
                failed.join(", ")
            )));
        }
        return Ok(());
    }
    let table = match command {
        Command::Modes => commands::with_workers(cfg, || cmd_modes(cfg))??,
        Command::Spectrum => cmd_spectrum(cfg)?,
        Command::Tensor => cmd_tensor(cfg)?,
        Command::Verify => unreachable!(),
    };
    let mut out = sink(cfg)?;
    table
        .write(cfg.output_format, &mut out)
        .map_err(write_err)?;
    out.flush().map_err(write_err)?;
    if command == Command::Tensor {
        let bad: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r[8] == 0.0)
            .map(|r| format!("{:e} (rel_change {:e})", r[0], r[7]))
            .collect();
        if !bad.is_empty() {
            return Err(CliError::Failed(format!(
                "quadrature did not reach tol.quad = {:e} within grid.max_refine = {} at eta = {}",
                cfg.tol_quad,
                cfg.max_refine,
                bad.join(", ")
            )));
        }
    }
    Ok(())
}
