mod args;
mod commands;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = error::CliError::new("usage", e.to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(2);
        }
    };
    if let Err(err) = commands::run(cli.command) {
        eprintln!("{}", err.to_json());
        std::process::exit(1);
    }
}
