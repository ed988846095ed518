mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{config_args, find_config, Cli};

/// Failure classes mapped to exit statuses.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag or input; exit 2.
    Usage(String),
    /// Failure while running; exit 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(flag: &str, err: impl fmt::Display) -> Self {
        CliError::Usage(format!("{flag}: {err}"))
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<frogwalk::Error> for CliError {
    fn from(e: frogwalk::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Splices config-file arguments in right after the subcommand so that
/// anything given on the command line overrides them.
fn expand_argv(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = find_config(&argv) else {
        return Ok(argv);
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| CliError::usage("--config", format!("{}: {e}", path.display())))?;
    let extra = config_args(&text).map_err(|e| CliError::usage("--config", e))?;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            i += 2;
        } else if argv[i].starts_with('-') {
            i += 1;
        } else {
            break;
        }
    }
    if i >= argv.len() {
        return Ok(argv);
    }
    let mut at = i + 1;
    // `oracle` takes its kind as the first positional.
    if argv[i] == "oracle" && argv.get(at).is_some_and(|a| !a.starts_with('-')) {
        at += 1;
    }
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

fn main() -> ExitCode {
    let argv = match expand_argv(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        // Help and version exit 0; parse errors exit 2.
        Err(e) => e.exit(),
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        CliError::Runtime(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
