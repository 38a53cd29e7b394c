//! Library side of the `qwk` binary.

pub mod args;
pub mod commands;
pub mod output;

use std::io;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;
use qwk_core::QwkError;
use thiserror::Error;

use args::{Cli, Command, OutputArgs};
use commands::Outcome;
use output::{canonical, render, write_text, Document, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] QwkError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read `{path}`: {source}")]
    Read { path: String, source: io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: String, source: io::Error },
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                QwkError::Schema(_)
                | QwkError::InvalidChannel(_)
                | QwkError::InvalidState(_)
                | QwkError::NotHermitian(_)
                | QwkError::InvalidDistribution(_) => 2,
                QwkError::VariantMismatch(_)
                | QwkError::DimensionMismatch(_)
                | QwkError::LabelCollision(_)
                | QwkError::UnknownLabel(_)
                | QwkError::AncillaTooSmall { .. } => 3,
                QwkError::InvalidParameter { .. } | QwkError::EmptyTypicalSet | QwkError::AtypicalWord => 4,
                QwkError::CapExceeded(_) => 5,
                QwkError::EmptyNet => 1,
            },
            CliError::Read { .. } => 2,
            CliError::Mismatch(_) => 3,
            CliError::Usage(_) => 4,
            CliError::Write { .. } | CliError::Failed(_) => 1,
        }
    }
}

pub fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("qwk".to_string()).chain(argv.iter().cloned()))
}

/// Parse, execute and report; returns the process exit code.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 4,
            };
        }
    };
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    if cli.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.jobs.unwrap_or(0))))?;
    pool.install(|| match &cli.command {
        Command::Rerun(r) => rerun(r, argv),
        cmd => {
            let started = Started::now();
            let outcome = commands::execute(cmd)?;
            finish(outcome, argv, &commands::output_args(cmd), started)
        }
    })
}

struct Started {
    clock: Instant,
    unix_ms: u64,
}

impl Started {
    fn now() -> Self {
        let unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        Self { clock: Instant::now(), unix_ms }
    }
}

fn finish(outcome: Outcome, argv: &[String], out: &OutputArgs, started: Started) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    if let Some(p) = &out.out {
        outputs.push(p.display().to_string());
    }
    if let Some(p) = &out.csv {
        outputs.push(p.display().to_string());
    }
    let manifest = RunManifest {
        command: outcome.command.to_string(),
        argv: argv.to_vec(),
        spec: outcome.spec.clone(),
        overrides: outcome.overrides.clone(),
        seed: outcome.seed,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started.unix_ms,
        wall_clock_s: started.clock.elapsed().as_secs_f64(),
    };
    let doc = Document { manifest, report: outcome.report };
    if let (Some(table), Some(p)) = (&outcome.table, &out.csv) {
        table.write(p)?;
    }
    match (&out.out, &outcome.text) {
        (Some(p), _) => {
            write_text(p, &render(&doc))?;
            if let Some(t) = &outcome.text {
                print!("{t}");
            }
            println!("{}", outcome.summary);
        }
        (None, Some(t)) => print!("{t}"),
        (None, None) => print!("{}", render(&doc)),
    }
    match outcome.failed {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

/// Recorded arguments without their output destinations.
fn replay_args(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" || a == "--csv" {
            it.next();
        } else if !(a.starts_with("--out=") || a.starts_with("--csv=")) {
            out.push(a.clone());
        }
    }
    out
}

fn rerun(r: &args::RerunArgs, _argv: &[String]) -> Result<(), CliError> {
    let text = output::read_text(&r.manifest)?;
    let doc: Document = serde_json::from_str(&text)
        .map_err(|e| QwkError::Schema(format!("{}: not an output file: {e}", r.manifest.display())))?;
    let mut argv = replay_args(&doc.manifest.argv);
    let cli = parse(&argv).map_err(|e| CliError::Usage(format!("recorded arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Usage("a rerun manifest cannot be replayed".into()));
    }
    let started = Started::now();
    let outcome = commands::execute(&cli.command)?;
    let fresh = canonical(outcome.report.clone());
    let recorded = canonical(doc.report);
    let mismatch = if r.check { first_difference(&recorded, &fresh, "report") } else { None };
    if let Some(p) = &r.out {
        argv.push("--out".into());
        argv.push(p.display().to_string());
    }
    let out = OutputArgs { out: r.out.clone(), csv: None };
    finish(outcome, &argv, &out, started)?;
    match mismatch {
        Some(path) => Err(CliError::Mismatch(format!("rerun differs from the recorded report at {path}"))),
        None => {
            if r.check {
                println!("report identical to {}", r.manifest.display());
            }
            Ok(())
        }
    }
}

fn first_difference(a: &serde_json::Value, b: &serde_json::Value, path: &str) -> Option<String> {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for k in x.keys().chain(y.keys()) {
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => {
                        if let Some(p) = first_difference(u, v, &format!("{path}.{k}")) {
                            return Some(p);
                        }
                    }
                    _ => return Some(format!("{path}.{k}")),
                }
            }
            None
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).enumerate().find_map(|(i, (u, v))| first_difference(u, v, &format!("{path}[{i}]")))
        }
        _ if a == b => None,
        _ => Some(path.to_string()),
    }
}
