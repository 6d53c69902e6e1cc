//! `funreg`: simulate, fit, predict, select-k, rates and coverage from the shell.

mod args;
mod commands;
mod output;

use clap::Parser;

use crate::args::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli.command) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
