use std::process::ExitCode;

use clap::Parser;

use iontrap_cli::commands::{execute, exit, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.flags.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(report) => {
            print!("{}", report.stdout);
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
