//! Command implementations behind the `tgp` binary, exposed as a library
//! so integration tests can drive them directly.

pub mod args;
pub mod calibrate;
pub mod common;
pub mod evalcmd;
pub mod export;
pub mod run;
pub mod spec;

use args::{Cli, Command};

/// Dispatch a parsed command line; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => run::cmd_run(a),
        Command::Calibrate(a) => calibrate::cmd_calibrate(a),
        Command::Eval(a) => evalcmd::cmd_eval(a),
        Command::Export(a) => export::cmd_export(a),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            common::exit_code(&err)
        }
    }
}
