mod args;
mod commands;
mod eventlog;
mod portfolio;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use eventlog::EventLog;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    /// The question was answered negatively: fails, unsat, unrealizable.
    Negative = 1,
    Usage = 2,
    ResourceLimit = 3,
}

/// Marks an error as a time, memory or size limit rather than bad input.
#[derive(Debug, thiserror::Error)]
#[error("resource limit: {0}")]
pub struct ResourceLimit(pub String);

fn classify(err: &anyhow::Error) -> Status {
    use synccount_core::direct::EncodeError;
    use synccount_core::verifier::VerifyError;
    use synccount_core::ModelError;
    for cause in err.chain() {
        if cause.is::<ResourceLimit>()
            || matches!(cause.downcast_ref(), Some(VerifyError::TooLarge { .. }))
            || matches!(cause.downcast_ref(), Some(EncodeError::TooLarge { .. }))
            || matches!(cause.downcast_ref(), Some(ModelError::TooLarge(_)))
        {
            return Status::ResourceLimit;
        }
    }
    Status::Usage
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let worker = portfolio::worker_index();
    if let Some(i) = worker {
        cli.enter_worker(i);
    }
    let log = match EventLog::open(cli.log.as_deref()) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: cannot open log: {e:#}");
            return ExitCode::from(Status::Usage as u8);
        }
    };
    log.emit("start", serde_json::json!({ "argv": std::env::args().collect::<Vec<_>>() }));

    let outcome = if cli.jobs > 1 && worker.is_none() && cli.command.fans_out() {
        portfolio::run(&cli, &log)
    } else {
        commands::dispatch(&cli, &log)
    };
    let code = match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err) as u8
        }
    };
    log.emit("finish", serde_json::json!({ "exit": code }));
    ExitCode::from(code)
}

impl Command {
    /// Commands that `--jobs` runs as a portfolio of seeded workers.
    fn fans_out(&self) -> bool {
        matches!(self, Command::Synth(_) | Command::Cegar(_))
    }
}
