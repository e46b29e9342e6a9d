//! The `sentivis` command line: dataset preparation, feature extraction,
//! training and evaluation.

pub mod args;
pub mod commands;
pub mod error;
pub mod runlog;
pub mod settings;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use crate::args::Cli;
pub use crate::error::{CliError, CliResult, EXIT_COMPUTE, EXIT_FORMAT, EXIT_IO, EXIT_OK, EXIT_USAGE};
use crate::args::{Command, TrainCommand};
use crate::settings::Settings;

/// Settings from `--config`, overridden by the global flags.
pub fn effective_settings(cli: &Cli) -> CliResult<Settings> {
    let mut s = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(t) = cli.threads {
        s.threads = Some(t);
    }
    Ok(s)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let settings = effective_settings(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = settings.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let out = &mut buf;
    let result = pool.install(|| match &cli.command {
        Command::Prepare(a) => commands::prepare(a, &settings, out),
        Command::Extract(a) => commands::extract(a, &settings, out),
        Command::Train(TrainCommand::Codebook(a)) => commands::train_codebook(a, &settings, out),
        Command::Train(TrainCommand::Model(a)) => commands::train_model(a, &settings, out),
        Command::Evaluate(a) => commands::evaluate(a, &settings, out),
        Command::NetInfo(a) => commands::net_info(a, out),
    });
    stdout
        .write_all(&buf)
        .and_then(|()| stdout.flush())
        .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))?;
    result
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
