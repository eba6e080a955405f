use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lipsub::report::{self, RunConfig, RunError};

/// Finite-scale constructions and verifiers for Lipschitz subspaces of C(K).
///
/// Run `lipsub list` for the available commands.
#[derive(Parser, Debug)]
#[command(name = "lipsub", version, allow_negative_numbers = true)]
struct Cli {
    /// Command, e.g. `szlenk` or `embed circle`.
    #[arg(num_args = 0..=2)]
    command: Vec<String>,
    /// JSON configuration file; flags override its fields.
    #[arg(long, env = "LIPSUB_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut flags = cli.run;
    flags.command = cli.command.join(" ");
    let config = match cli.config {
        Some(path) => match RunConfig::from_file(&path) {
            Ok(file) => flags.over(file),
            Err(e) => return fail(&e),
        },
        None => flags,
    };
    if config.command.is_empty() {
        return fail(&RunError::Usage("no command given (see `lipsub list`)".into()));
    }
    match report::run(&config) {
        Ok((outcome, code)) => {
            let dir = config.out_dir();
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            match outcome.first_failure() {
                Some(c) => eprintln!("check failed: {}", c.name),
                None => println!("report written to {}", dir.join("report.json").display()),
            }
            ExitCode::from(code as u8)
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("lipsub: {e}");
    ExitCode::from(e.exit_code() as u8)
}
