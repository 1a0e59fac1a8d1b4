//! Batch front end for the `spectral-holonomy` library: every run reads one
//! JSON job configuration, writes CSV/JSON outputs atomically into an output
//! directory and finishes with a `report.json`.
//!
//! Exit codes: 0 success, 1 a check did not hold, 2 configuration or I/O
//! error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spectral_holonomy::family::BuiltinFamily;

use crate::commands::Context;
use crate::error::{CliError, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK};
use crate::output::OutputDir;
use crate::report::{inputs_digest, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Scan,
    Trace,
    Verify,
    Classify,
    Simulate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Scan => "scan",
            Task::Trace => "trace",
            Task::Verify => "verify",
            Task::Classify => "classify",
            Task::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

fn execute(task: Task, text: &str, ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.report.timed("load", |_| config::load(text))?;
    ctx.report.family = Some(cfg.family.name());
    ctx.report.anchors = cfg.anchors.clone();
    ctx.report.bindings = cfg.bindings.clone();
    if let Some(d) = &cfg.job.description {
        ctx.report.detail("description", d);
    }
    for (name, coords) in &cfg.anchors {
        ctx.say(format!("anchor {name} = {coords:?}"));
    }
    match task {
        Task::Scan => commands::scan(&cfg, ctx),
        Task::Trace => commands::trace_loops(&cfg, ctx),
        Task::Verify => commands::verify(&cfg, ctx),
        Task::Classify => commands::classify(&cfg, ctx),
        Task::Simulate => commands::simulate(&cfg, ctx),
    }
}

/// Runs one task and returns the process exit code.
pub fn run(task: Task, opts: &RunOptions) -> u8 {
    let out = match OutputDir::create(&opts.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let bytes = fs::read(&opts.config);
    let digest = inputs_digest(bytes.as_deref().unwrap_or_default(), opts.seed);
    let mut ctx = Context {
        out,
        report: RunReport::new(task.name(), digest, opts.seed),
        seed: opts.seed,
        quiet: opts.quiet,
    };
    let result = match bytes {
        Err(e) => Err(CliError::config(format!("cannot read {}: {e}", opts.config.display()))),
        Ok(b) => match String::from_utf8(b) {
            Err(_) => Err(CliError::config("configuration is not UTF-8")),
            Ok(text) => execute(task, &text, &mut ctx),
        },
    };
    let code = match &result {
        Ok(()) if ctx.report.all_passed() => EXIT_OK,
        Ok(()) => {
            ctx.report.status = "mismatch".into();
            for c in ctx.report.checks.iter().filter(|c| !c.passed) {
                eprintln!(
                    "mismatch: {} [{}]: measured {}, expected {}",
                    c.name,
                    c.kind,
                    c.measured,
                    c.expected.as_deref().unwrap_or("-")
                );
            }
            EXIT_MISMATCH
        }
        Err(e) => {
            eprintln!("error: {e}");
            ctx.report.status = match e.exit_code() {
                EXIT_CONFIG => "config_error".into(),
                _ => "numerical_failure".into(),
            };
            ctx.report.error = Some(e.to_string());
            e.exit_code()
        }
    };
    ctx.report.exit_code = code;
    let mut outputs = ctx.out.written().to_vec();
    outputs.push("report.json".into());
    ctx.report.outputs = outputs;
    if let Err(e) = ctx.out.write_json("report.json", &ctx.report) {
        eprintln!("error: {e}");
        return code.max(EXIT_CONFIG);
    }
    if !opts.quiet {
        let status = if code == EXIT_OK { "ok" } else { ctx.report.status.as_str() };
        println!("{status}; report written to {}", ctx.out.root().join("report.json").display());
    }
    code
}

#[derive(Debug, Serialize)]
pub struct FamilyInfo {
    pub id: &'static str,
    pub params: &'static [&'static str],
    pub matrix: &'static str,
}

pub fn families() -> Vec<FamilyInfo> {
    BuiltinFamily::ALL
        .into_iter()
        .map(|b| FamilyInfo {
            id: b.id(),
            params: b.params(),
            matrix: b.description(),
        })
        .collect()
}

/// Lists built-in families; with an output directory also writes
/// `families.json` and a report.
pub fn run_families(out: Option<&Path>, seed: u64, quiet: bool) -> u8 {
    let list = families();
    if !quiet {
        for f in &list {
            println!("{:<12} ({})  {}", f.id, f.params.join(", "), f.matrix);
        }
    }
    let Some(dir) = out else { return EXIT_OK };
    let result = (|| {
        let mut out = OutputDir::create(dir)?;
        out.write_json("families.json", &list)?;
        let mut report = RunReport::new("families", inputs_digest(b"", seed), seed);
        report.outputs = vec!["families.json".into(), "report.json".into()];
        out.write_json("report.json", &report)
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
