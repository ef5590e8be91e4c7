use std::process::ExitCode;

use clap::Parser;
use viscoflow::cli::{configure_threads, exit_code, resolve_config, run, Cli, EXIT_CONFIG};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = configure_threads().and_then(|()| resolve_config(&cli)).and_then(|cfg| {
        if cli.print_config {
            println!("{}", cfg.to_json());
            return Ok(());
        }
        let Some(command) = cli.command else {
            return Err(viscoflow::Error::Config(
                "no subcommand given (simulate, error-study, stability, demo-1d)".into(),
            ));
        };
        run(command, &cfg, &mut std::io::stdout().lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
