//! `toric-game` experiment runner.
//!
//! Exit status: 0 on success, 1 on a configuration error (with an
//! `{"error": ...}` object on stderr), 2 when a run completes but its
//! built-in check fails (`{"check_failed": ...}` on stderr).

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Command, Status};
use config::Flags;

#[derive(Debug, Parser)]
#[command(name = "toric-game", version, about = "Toric code nonlocal game simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

fn report(key: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ key: message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    report("error", e.to_string().trim_end());
                    ExitCode::from(1)
                }
            }
        }
    };
    match commands::run(cli.command, cli.flags) {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed(message)) => {
            report("check_failed", &message);
            ExitCode::from(2)
        }
        Err(e) => {
            report("error", &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
