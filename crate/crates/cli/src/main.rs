use std::io;
use std::process::ExitCode;

use clap::Parser;
use cwcu_cli::{render_error, run, Cli, ERROR_EXIT};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("{}", render_error(&e));
            ExitCode::from(ERROR_EXIT as u8)
        }
    }
}
