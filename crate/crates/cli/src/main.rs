//! `dialect-lab`: batch front-end for corpus generation, preprocessing,
//! augmentation, feature extraction, training, evaluation and reporting.
//!
//! Exit codes: 0 success, 1 a stage failed, 2 usage error.

mod args;
mod commands;
mod run_manifest;

use std::ffi::OsString;
use std::process::ExitCode;


/// A failure tagged with the pipeline stage it happened in.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed", self.stage)?;
        // Library errors often repeat their source in their own message.
        let mut last = String::new();
        for cause in self.source.chain() {
            let msg = cause.to_string();
            if !last.ends_with(&msg) {
                write!(f, ": {msg}")?;
            }
            last = msg;
        }
        Ok(())
    }
}

pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Parses `argv` (program name first), expanding any `--config` file, and
/// runs the command.
pub fn dispatch(argv: Vec<OsString>) -> ExitCode {
    let expanded = match args::expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: config failed: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match args::parse_cli(&expanded) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let effective: Vec<String> = expanded
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::run(cli.command, effective) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    dispatch(std::env::args_os().collect())
}
