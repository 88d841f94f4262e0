//! The `btss` command line: every stage of the segmentation pipeline as a
//! subcommand over a session file or a directory of them.
//!
//! Exit status is 0 on success, 1 when input fails validation or a stage
//! errors, and 2 on usage errors.

pub mod args;
pub mod commands;
pub mod io;
pub mod process;
pub mod tables;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Thresholds(a) => commands::thresholds(a),
        Command::Segment(a) => commands::segment(a),
        Command::Label(a) => commands::label(a),
        Command::Features(a) => commands::features(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Render(a) => commands::render(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Pipeline(a) => commands::pipeline(a),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_INVALID,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}
