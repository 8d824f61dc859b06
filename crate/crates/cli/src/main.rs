use std::process::ExitCode;

use clap::Parser;
use efpsa_cli::{emit, run, Cli, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help / --version
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("");
            let err = CliError::validation(first.strip_prefix("error: ").unwrap_or(first));
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    let result = run(&cli).and_then(|out| {
        for w in &out.warnings {
            eprintln!("warning: {}", w.split_whitespace().collect::<Vec<_>>().join(" "));
        }
        emit(&out, cli.global.out.as_deref())
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
