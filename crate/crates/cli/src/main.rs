use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bdt_cli::Cli::parse();
    match bdt_cli::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
