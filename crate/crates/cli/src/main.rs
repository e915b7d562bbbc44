mod args;
mod commands;
mod config;
mod dump;
mod error;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cli.apply_globals(&mut cfg)?;
    match &cli.command {
        Command::Keyframes(a) => a.apply(&mut cfg),
        Command::Features(a) => a.extractor.apply(&mut cfg)?,
        Command::Train(a) => {
            a.classifier.apply(&mut cfg)?;
            a.split.apply(&mut cfg)?;
        }
        Command::Eval(_) => {}
        Command::Bench(a) => {
            a.extractor.apply(&mut cfg)?;
            a.classifier.apply(&mut cfg)?;
            a.split.apply(&mut cfg)?;
            if let Some(runs) = a.runs {
                cfg.bench.runs = runs;
            }
        }
        Command::Pipeline(a) => {
            a.extractor.apply(&mut cfg)?;
            a.classifier.apply(&mut cfg)?;
            a.split.apply(&mut cfg)?;
        }
        Command::Synth(a) => a.apply(&mut cfg),
    }
    cfg.finish();
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("cannot start {n} worker threads: {e}")))?;
    }
    match &cli.command {
        Command::Keyframes(a) => commands::keyframes(a, &cfg),
        Command::Features(a) => commands::features(a, &cfg),
        Command::Train(a) => commands::train_cmd(a, &mut cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Bench(a) => commands::bench(a, &cfg),
        Command::Pipeline(a) => commands::pipeline(a, &cfg),
        Command::Synth(a) => commands::synth(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(4)
        }
    }
}
