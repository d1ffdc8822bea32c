use std::process::ExitCode;

use clap::Parser;

use chainvar::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("chainvar: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
