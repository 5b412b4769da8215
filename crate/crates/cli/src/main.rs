use std::process::ExitCode;

use clap::Parser;
use flatlab::{configure_threads, report, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|_| run(&cli));
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("{}", report::to_line(&serde_json::json!({"warning": w})));
            }
            println!("{}", report::to_line(&out.summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", report::to_line(&e.to_json()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
