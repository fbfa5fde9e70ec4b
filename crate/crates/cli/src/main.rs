use std::process::ExitCode;

use clap::Parser;
use irls_cli::{run, Cli};

fn threads_from_env() -> Result<(), String> {
    let Ok(value) = std::env::var("IRLS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("IRLS_THREADS={value}: expected a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("IRLS_THREADS={value}: {e}"))
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and names the offending flag
    let cli = Cli::parse();
    if let Err(msg) = threads_from_env() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
