use std::io;
use std::process::ExitCode;

use clap::Parser;
use env_logger::Env;

use metricfuse::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("METRICFUSE_LOG", "warn")).init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
