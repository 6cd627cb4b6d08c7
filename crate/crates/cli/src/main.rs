//! `rfgap` command-line runner.
//!
//! Every command writes its files into `--out` together with `run.json`,
//! which echoes the full job; `rfgap rerun --sidecar run.json` repeats it.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 internal invariant
//! violation.

mod args;
mod run;

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Job};

pub const VERSION: &str = match option_env!("RFGAP_DESCRIBE") {
    Some(v) => v,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

/// Bad flags or flag combinations that clap cannot catch.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    tool: String,
    version: String,
    threads: Option<usize>,
    job: Job,
    outputs: Vec<String>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<rfgap::Error>() {
            return match e {
                rfgap::Error::Param(_) => 2,
                rfgap::Error::Invariant(_) => 4,
                _ => 3,
            };
        }
    }
    3
}

fn execute(job: Job, threads: Option<usize>) -> Result<()> {
    let (job, threads) = match job {
        Job::Rerun(r) => {
            let file = File::open(&r.sidecar).with_context(|| format!("cannot open {}", r.sidecar.display()))?;
            let side: Sidecar = serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Usage(format!("{} is not a run sidecar: {e}", r.sidecar.display())))?;
            if side.version != VERSION {
                log::warn!("sidecar written by {}, running {}", side.version, VERSION);
            }
            let mut job = side.job;
            if let (Some(out), Some(slot)) = (r.out, job.out_mut()) {
                *slot = out;
            }
            (job, threads.or(side.threads))
        }
        job => (job, threads),
    };
    let outputs = match threads {
        Some(0) => return Err(Usage("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker threads")?
            .install(|| run::dispatch(&job))?,
        None => run::dispatch(&job)?,
    };
    let Some(dir) = job.clone().out_mut().cloned() else {
        return Err(Usage("a sidecar cannot record another rerun".into()).into());
    };
    let sidecar = Sidecar {
        tool: "rfgap".into(),
        version: VERSION.into(),
        threads,
        job,
        outputs,
    };
    let mut out = run::Output::new(&dir)?;
    out.json("run.json", &sidecar)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.job, cli.threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
