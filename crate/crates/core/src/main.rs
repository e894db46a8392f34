use std::process::ExitCode;

use clap::Parser;
use fastread::cli::{init_logging, main_with, Cli};

fn main() -> ExitCode {
    init_logging();
    main_with(Cli::parse())
}
