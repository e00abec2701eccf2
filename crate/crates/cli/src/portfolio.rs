//! `--jobs N`: re-run the current command in N worker processes with
//! distinct derived seeds and keep the first decisive answer.

use std::ffi::OsString;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};

use crate::args::Cli;
use crate::eventlog::EventLog;
use crate::{commands, ResourceLimit, Status};

pub const WORKER_ENV: &str = "SYNCCOUNT_WORKER";

pub fn worker_index() -> Option<usize> {
    std::env::var(WORKER_ENV).ok()?.parse().ok()
}

/// Private artifact path of worker `i`.
pub fn worker_path(path: &Path, i: usize) -> PathBuf {
    let mut name: OsString = path.as_os_str().to_owned();
    name.push(format!(".w{i}"));
    PathBuf::from(name)
}

struct Worker {
    child: Child,
    stdout: File,
    exit: Option<i32>,
}

fn remove_artifact(path: &Path) {
    if path.is_dir() {
        let _ = std::fs::remove_dir_all(path);
    } else {
        let _ = std::fs::remove_file(path);
    }
}

pub fn run(cli: &Cli, log: &EventLog) -> Result<u8> {
    let exe = std::env::current_exe().context("locating own executable")?;
    let args: Vec<OsString> = std::env::args_os().skip(1).collect();
    let jobs = cli.jobs as usize;
    let mut workers = Vec::with_capacity(jobs);
    for i in 0..jobs {
        let stdout = tempfile::tempfile()?;
        let child = Command::new(&exe)
            .args(&args)
            .env(WORKER_ENV, i.to_string())
            .stdin(Stdio::null())
            .stdout(stdout.try_clone()?)
            .spawn()
            .with_context(|| format!("spawning worker {i}"))?;
        workers.push(Worker {
            child,
            stdout,
            exit: None,
        });
    }
    log.emit("portfolio", serde_json::json!({ "jobs": jobs }));

    let deadline = cli.time_limit.map(|t| Instant::now() + t);
    let winner = loop {
        let mut running = 0;
        for (i, w) in workers.iter_mut().enumerate() {
            if w.exit.is_some() {
                continue;
            }
            match w.child.try_wait()? {
                Some(status) => {
                    let code = status.code().unwrap_or(Status::Usage as i32);
                    w.exit = Some(code);
                    log.emit("worker_exit", serde_json::json!({ "worker": i, "exit": code }));
                }
                None => running += 1,
            }
        }
        let decisive = workers.iter().position(|w| {
            matches!(w.exit, Some(c) if c == Status::Success as i32 || c == Status::Negative as i32)
        });
        if decisive.is_some() || running == 0 {
            break decisive;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break None;
        }
        thread::sleep(Duration::from_millis(20));
    };
    for w in workers.iter_mut().filter(|w| w.exit.is_none()) {
        let _ = w.child.kill();
        let _ = w.child.wait();
    }

    let artifacts = cli.command.artifacts();
    for (i, _) in workers.iter().enumerate() {
        if Some(i) != winner {
            for p in &artifacts {
                remove_artifact(&worker_path(p, i));
            }
        }
    }
    let Some(win) = winner else {
        let codes: Vec<Option<i32>> = workers.iter().map(|w| w.exit).collect();
        if codes.iter().all(|c| *c == Some(Status::Usage as i32)) {
            anyhow::bail!("every worker failed");
        }
        return Err(ResourceLimit(format!("no worker reached a verdict (exit codes {codes:?})")).into());
    };
    for p in &artifacts {
        let from = worker_path(p, win);
        if from.exists() {
            remove_artifact(p);
            std::fs::rename(&from, p).with_context(|| format!("moving {}", from.display()))?;
        }
    }
    let w = &mut workers[win];
    let mut text = String::new();
    w.stdout.seek(SeekFrom::Start(0))?;
    w.stdout.read_to_string(&mut text)?;
    for p in &artifacts {
        text = text.replace(&worker_path(p, win).display().to_string(), &p.display().to_string());
    }
    print!("{text}");
    std::io::stdout().flush()?;
    println!("portfolio: worker {win} of {jobs} answered first");
    commands::recheck_artifacts(cli)?;
    Ok(w.exit.unwrap_or(0) as u8)
}
