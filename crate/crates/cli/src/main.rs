use clap::Parser;
use sbm_cli::commands::{run, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
