//! The `udw` command-line tool: configuration, table output and the
//! `verify` audit on top of `udw-core`.

pub mod commands;
pub mod config;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use thiserror::Error;

use config::{Cli, Command, ConfigError, RunConfig};
use table::TableError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => EXIT_INVALID,
            _ => EXIT_FAILURE,
        }
    }
}

macro_rules! compute_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.to_string())
            }
        }
    )*};
}

compute_error!(
    udw_core::fluid::FluidError,
    udw_core::stress::StressError,
    udw_core::response::ResponseError,
    udw_core::modes::ModeError,
    udw_core::profiles::ModelError,
    udw_core::quadcore::QuadError
);

/// Caps the rayon pool at `UDW_THREADS` workers when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("UDW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Invalid(format!("UDW_THREADS={raw} is not a positive integer")))?;
    // a pool built earlier in this process stays in force
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            let io_err = |source| CliError::Output {
                path: path.display().to_string(),
                source,
            };
            let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
            write(&mut file)?;
            file.flush().map_err(io_err)
        }
        None => write(stdout),
    }
}

fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let table = match cfg.command {
        Command::Fluid => commands::fluid(cfg)?,
        Command::Stress => commands::stress(cfg)?,
        Command::Response => commands::response(cfg)?,
        Command::ScanMu => commands::scan_mu(cfg)?,
        Command::Figure => commands::figure(cfg)?,
        Command::Verify => {
            commands::validate_model(&cfg.params)?;
            let report = verify::run(cfg);
            emit(cfg, stdout, |w| {
                serde_json::to_writer_pretty(&mut *w, &report).map_err(TableError::from)?;
                w.write_all(b"\n").map_err(TableError::from)?;
                Ok(())
            })?;
            return Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE });
        }
    };
    emit(cfg, stdout, |w| Ok(table.write(cfg.format, w)?))?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let outcome = configure_threads()
        .and_then(|_| RunConfig::resolve(cli.command, &cli.flags).map_err(CliError::from))
        .and_then(|cfg| execute(&cfg, stdout));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "udw: {e}");
            e.exit_code()
        }
    }
}
