//! `coherence-forge` command-line tool.

mod args;
mod commands;
mod config;
mod error;
mod format;
mod svg;

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

const THREADS_ENV: &str = "COHERENCE_FORGE_THREADS";

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

fn run(raw: Vec<OsString>) -> i32 {
    let args = match config::find_config(&raw) {
        Some(path) => match config::load(Path::new(&path)) {
            Ok(entries) => config::merge(raw, &entries),
            Err(e) => return fail(e),
        },
        None => raw,
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        return fail(e);
    }
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::Usage(format!("{THREADS_ENV}={v} is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}
