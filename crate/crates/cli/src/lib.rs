//! Command-line front end and HTTP service for the `sovc` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;

use std::io::Write;

use clap::Parser;

pub use commands::{Cli, Command};
pub use config::RunConfig;
pub use error::CliError;

/// Parses `args` (including the program name), resolves the configuration
/// and runs the subcommand. Returns the process exit code.
pub fn run(args: Vec<String>, env: Vec<(String, String)>, out: &mut dyn Write) -> i32 {
    let (rest, flags) = match config::split_dotted_flags(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = config::resolve(cli.config.as_deref(), env, &flags).and_then(|mut cfg| {
        if let Some(d) = &cli.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(c) = &cli.checkpoint {
            cfg.checkpoint = Some(c.clone());
        }
        commands::execute(cli, cfg, out)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
