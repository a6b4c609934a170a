//! Command-line front end: runs JSON-configured scenarios, the built-in
//! reduced verification suite, and prints the config format.
//!
//! Exit codes: 0 when the run's check passes (or the task has none), 2 when a
//! check fails, 1 for config or execution errors.

mod config;
mod selftest;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asymlag", version, about = "Causal and anti-causal variational toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a JSON config and write its artifacts.
    Run {
        /// Path to the scenario JSON.
        config: PathBuf,
    },
    /// Execute the reduced built-in verification suite.
    Selftest {
        /// Comma-separated subset of row names (default: all rows).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Print the scenario config format.
    Schema,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::Selftest { only } => selftest::run(&only),
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(path: &Path) -> Result<bool> {
    let sc = config::load(path)?;
    let outcome = tasks::run_scenario(&sc)?;
    let task_value = serde_json::to_value(&sc.task).context("serializing task params")?;
    let params = task_value.get("params").cloned().unwrap_or(serde_json::Value::Null);
    let summary = serde_json::json!({
        "task": sc.task.name(),
        "params": params,
        "metrics": outcome.metrics,
        "verdict": outcome.verdict,
        "config": &sc,
    });
    let text = serde_json::to_string_pretty(&summary).context("serializing summary")? + "\n";
    let dest = sc.output_dir.join("summary.json");
    std::fs::write(&dest, text).with_context(|| format!("cannot write {}", dest.display()))?;
    println!("{}: {}", sc.task.name(), outcome.verdict);
    Ok(outcome.pass)
}

const SCHEMA: &str = r#"asymlag scenario configuration (JSON)
=====================================

usage: asymlag run <config.json>
       asymlag selftest [--only row1,row2]
       asymlag schema

Top-level object (unknown fields are rejected everywhere):

  seed        u64      drives every randomized probe in the scenario
  grid        object   { "a": f64, "b": f64, "n_steps": int >= 2 }
  operator    object   see OPERATOR
  lagrangian  object   see LAGRANGIAN
  task        object   { "kind": <name>, "params": { ... } }, see TASKS
  output_dir  string   directory receiving summary.json and data files

OPERATOR
  { "kind": "classical" }
  { "kind": "finite_diff",   "eps": f64 }   eps must be a positive multiple of
                                            the grid step
  { "kind": "fractional_rl", "alpha": f64, "tau": f64 }
                                            alpha in (0, 1], tau > 0

LAGRANGIAN
  { "family": "free",       "dim": int (default 1) }
  { "family": "oscillator", "omega": f64 > 0 }

PROFILE (trajectory shapes; each parameter is optional, default 1)
  { "profile": "cosine",    "frequency": f64 }
  { "profile": "sine",      "frequency": f64 }
  { "profile": "linear",    "slope": f64 }
  { "profile": "exp_decay", "rate": f64 }
  { "profile": "random",    "amplitude": f64 }   drawn from the scenario seed

STATE (a doubled-branch trajectory)
  { "shape": PROFILE, "branch": "plus" | "minus" | "general" }
  "general" pairs the profile with its half-amplitude reflection; a random
  profile draws the two branches independently.

TASKS (task.kind, with task.params fields)
  ibp_check      { "tol": f64 (default 1e-8) }
                 checks the product-rule defect of the operator pair on two
                 bump functions; writes inputs.csv
  embed_demo     { "state": STATE }
                 applies the doubled demonstration expression and reports the
                 selector; writes embedded.csv and embedded.dat
  residual       { "form": "causal_plus" | "anti_causal_plus" | "causal_minus"
                   | "anti_causal_minus" | "embedded_general",
                   "state": STATE, "tol": f64 (optional) }
                 evaluates the chosen equation residual; writes residual.csv
                 and residual.dat; with tol set, passes when the interior sup
                 stays within it
  extremal       { "space": "full" | "plus" | "minus", "state": STATE,
                   "tol": f64 (optional) }
                 sweeps the variation basis and reports whether the state is
                 extremal for the action
  coherence      { "state": STATE, "tol": f64,
                   "space": "plus" | "minus" (optional) }
                 compares the restricted doubled equation against the direct
                 single-branch derivation
  solve          { "x0": f64, "v0": f64 (default 0),
                   "direction": "forward" | "backward" (default "forward"),
                   "expect": { "truth": "exp_decay" | "cosine",
                               "rel_tol": f64 } (optional) }
                 marches the causal oscillator equation; writes trajectory.csv
                 and trajectory.dat; with expect set, compares against the
                 closed form anchored at the seeded end
  reversibility  { "expect": "reversible" | "irreversible" (optional),
                   "tol": f64 (optional) }
                 decides whether the forward and backward equations share
                 solutions; the verdict is Reversible or Irreversible
  composition    { "alpha": f64 in (0, 1), "input": PROFILE,
                   "tol": f64 (default: grid step) }
                 measures the gap between applying the order-alpha derivative
                 twice and the order-2*alpha derivative once; writes
                 composition_gap.dat

OUTPUT
  summary.json   { "config", "metrics", "params", "task", "verdict" };
                 "config" echoes the fully resolved scenario, so feeding it
                 back through `run` reproduces the same artifacts
  *.csv          comma-separated node data with a header row
  *.dat          two-column plot data (time, value), no plotting commands

EXIT CODES
  0  the scenario ran and its check passed (or the task has no check)
  2  the scenario ran and its check failed
  1  invalid config, invalid parameters, or an execution error

ENVIRONMENT
  ASYMLAG_THREADS   caps worker threads for basis sweeps (default 1); results
                    are bit-identical at any setting
"#;
