use std::process::ExitCode;

use clap::Parser;
use qkdrate_cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
