use std::process::ExitCode;

use clap::Parser;
use polykin::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = cli::configure_threads().and_then(|_| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        cli::run(args, &mut lock)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
