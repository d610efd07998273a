use std::process::ExitCode;

use bolduc::harness::{cli_command, parse_cli, run_experiment};
use clap::error::ErrorKind;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<_> = std::env::args_os().collect();
    if let Err(e) = cli_command().try_get_matches_from(&args) {
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            e.exit();
        }
    }
    let cfg = match parse_cli(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(report) => {
            let failed = report.failed_trials();
            eprintln!(
                "wrote {} and {}",
                report.trace_path.display(),
                report.summary_path.display()
            );
            if failed > 0 {
                eprintln!("{failed} run(s) failed");
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
