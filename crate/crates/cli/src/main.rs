//! `billiard-mc`: simulation and diagnostics for randomly perturbed convex
//! billiards.

mod commands;
mod exec;
mod output;
mod parse;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use billiard_mc_core::tolerances::{
    Tolerances, DEFAULT_ABSORPTION_THRESHOLD, DEFAULT_BOOTSTRAP, DEFAULT_GRID, DEFAULT_RESOLUTION, DEFAULT_STEP_BUDGET,
    DEFAULT_SUBSAMPLE,
};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use commands::RunCommand;
use exec::Pool;
use output::{OutputRecord, Outputs, Target};
use parse::UsageError;

const THREADS_ENV: &str = "BILLIARD_MC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "billiard-mc", version, about = "Randomly perturbed billiards in convex tables")]
struct Cli {
    /// Worker threads (0 = one per logical core); BILLIARD_MC_THREADS overrides
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory, or a file path for the primary output. Without it
    /// the primary output goes to stdout and nothing else is written.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(flatten)]
    Run(RunCommand),
    /// Re-run a manifest and compare output digests
    Replay { manifest: PathBuf },
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    #[serde(flatten)]
    command: RunCommand,
    seed: Option<u64>,
    /// Resolved table, including its node count.
    table: serde_json::Value,
    defaults: serde_json::Value,
    threads: usize,
    started_unix: f64,
    finished_unix: f64,
    outputs: Vec<OutputRecord>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn defaults() -> serde_json::Value {
    let t = Tolerances::default();
    json!({
        "grid": [DEFAULT_GRID.0, DEFAULT_GRID.1],
        "subsample": DEFAULT_SUBSAMPLE,
        "bootstrap": DEFAULT_BOOTSTRAP,
        "absorption_threshold": DEFAULT_ABSORPTION_THRESHOLD,
        "resolution": DEFAULT_RESOLUTION,
        "step_budget": DEFAULT_STEP_BUDGET.to_string(),
        "tolerances": {
            "negative_curvature": t.negative_curvature,
            "curvature_zero": t.curvature_zero,
            "grazing_angle": t.grazing_angle,
            "bisection_width": t.bisection_width,
            "bracket_probes": t.bracket_probes,
            "angle_rounding": t.angle_rounding,
            "min_resolution": t.min_resolution,
        },
    })
}

fn threads(flag: usize) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{THREADS_ENV}={v}: expected a non-negative integer")).into()),
        Err(_) => Ok(flag),
    }
}

fn run(cmd: &RunCommand, pool: &Pool, target: Target) -> Result<Manifest> {
    let started = unix_now();
    let table = parse::table_spec(cmd.table_arg())?;
    let mut out = Outputs::new(target)?;
    cmd.run(pool, &mut out)?;
    if !out.skipped().is_empty() {
        eprintln!("not written without --out: {}", out.skipped().join(", "));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.clone(),
        seed: cmd.seed(),
        table: parse::spec_json(&table),
        defaults: defaults(),
        threads: pool.threads(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs: out.records().to_vec(),
    };
    if let Some(path) = out.target().manifest_path() {
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(manifest)
}

fn replay(path: &Path, pool: &Pool, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let old: Manifest =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: not a run manifest: {e}", path.display())))?;
    let target = match out {
        Some(p) => Target::from_out(Some(p)),
        None => Target::Discard,
    };
    let new = run(&old.command, pool, target)?;
    let mut mismatches = 0;
    for rec in &old.outputs {
        match new.outputs.iter().find(|r| r.name == rec.name) {
            Some(r) if r.sha256 == rec.sha256 => println!("{}: match {}", rec.name, rec.sha256),
            Some(r) => {
                mismatches += 1;
                println!("{}: MISMATCH recorded {} replayed {}", rec.name, rec.sha256, r.sha256);
            }
            None => {
                mismatches += 1;
                println!("{}: not produced on replay", rec.name);
            }
        }
    }
    if mismatches > 0 {
        bail!("{mismatches} of {} outputs differ from the manifest", old.outputs.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = threads(cli.threads).and_then(|n| {
        let pool = Pool::new(n)?;
        match &cli.command {
            Command::Run(cmd) => run(cmd, &pool, Target::from_out(cli.out.as_deref())).map(|_| ()),
            Command::Replay { manifest } => replay(manifest, &pool, cli.out.as_deref()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run `billiard-mc --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
