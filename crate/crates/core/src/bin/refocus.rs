use std::process::ExitCode;

use clap::Parser;

use refocus::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            match &output.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &output.json) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{}", output.json),
            }
            match output.failed_check {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
