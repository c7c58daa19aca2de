//! `ehrhard`: command-line front end of the lab.
//!
//! Exit codes: 0 when every verdict passes, 2 when an inequality or
//! identity check fails (or the numerics break down), 3 on usage and
//! precondition errors.

mod args;
mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Format};
use config::Settings;

pub const EXIT_FAIL: u8 = 2;
pub const EXIT_PRECONDITION: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(ehrhard_core::Error),
}

impl From<ehrhard_core::Error> for CliError {
    fn from(e: ehrhard_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_PRECONDITION,
            CliError::Core(e) if e.is_precondition() => EXIT_PRECONDITION,
            CliError::Core(_) => EXIT_FAIL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn emit(cli: &Cli, report: &ehrhard_core::report::RunReport) -> Result<(), CliError> {
    let settings = Settings::load(cli.common.config.as_deref())?;
    let format = match settings.pick::<String>("format", None)?.as_deref() {
        _ if cli.common.format.is_some() => cli.common.format.expect("checked"),
        None | Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(other) => return Err(CliError::Usage(format!("config key 'format': unknown format '{other}'"))),
    };
    let text = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv()?,
    };
    let out = settings.pick("out", cli.common.out.clone())?;
    match out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write report: {e}"))),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_PRECONDITION),
            };
        }
    };
    let result = commands::run(&cli.common, cli.command.clone(), &argv[1..]).and_then(|report| {
        emit(&cli, &report)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            for v in &report.verdicts {
                eprintln!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
