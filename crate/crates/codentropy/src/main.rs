use clap::Parser;

use codentropy::cli::{run, Cli, CliError};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(violations)) => {
            for v in violations {
                eprintln!("error: {v}");
            }
            std::process::exit(2);
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
