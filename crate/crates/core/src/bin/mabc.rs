//! Command-line front end: run scenarios, check traces, sweep grids and
//! export the bundled scenarios.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage or configuration errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mabc::analysis::{check_condition_all, series, validate_witness, write_series_csv, ConditionMode, Properness};
use mabc::harness::config::Expectations;
use mabc::harness::library::{builtin, builtin_names, builtin_text};
use mabc::harness::sweep::write_sweep_csv;
use mabc::harness::{build_report, run_scenario_with, sweep, GridConfig, RunOptions, ScenarioConfig};
use mabc::protocol::vectors::{read_vectors, verify_vectors, write_vectors};
use mabc::trace::Trace;

#[derive(Parser)]
#[command(name = "mabc", version, about = "Approximate Byzantine consensus simulator for mobile networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trace.jsonl, report.json and series.csv.
    Run {
        /// Scenario file, or `builtin:<name>`.
        #[arg(long)]
        scenario: String,
        /// Overrides the seed of the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write step vectors (vectors.jsonl).
        #[arg(long)]
        vectors: bool,
    },
    /// Re-run the checkers over an existing trace.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Interval width; defaults to the value recorded in the trace.
        #[arg(long)]
        delta: Option<f64>,
        /// `per-phase` or `io:<W>`.
        #[arg(long, default_value = "per-phase")]
        mode: ConditionMode,
        /// Count only values delivered in the witness round.
        #[arg(long)]
        strict: bool,
    },
    /// Run a parameter grid over a scenario template across seeds.
    Sweep {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List or export the bundled scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Replay a step-vector file against this implementation.
    VerifyVectors {
        #[arg(long)]
        vectors: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
    /// Print the scenario file to stdout, or write it to `--out`.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failed check, as opposed to a usage error.
#[derive(Debug)]
struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("one or more checks failed")
    }
}

impl std::error::Error for CheckFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailed>() => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { scenario, seed, out, vectors } => cmd_run(&scenario, seed, &out, vectors),
        Command::Check { trace, delta, mode, strict } => cmd_check(&trace, delta, mode, strict),
        Command::Sweep { scenario, grid, seeds, out } => cmd_sweep(&scenario, &grid, seeds, &out),
        Command::Scenarios { action: ScenarioAction::List } => {
            for name in builtin_names() {
                let cfg = builtin(name)?;
                println!("{name:<26} {}", cfg.description);
            }
            Ok(())
        }
        Command::Scenarios { action: ScenarioAction::Export { name, out } } => {
            let text = builtin_text(&name).with_context(|| format!("unknown built-in scenario `{name}`"))?;
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::VerifyVectors { vectors } => {
            let file = File::open(&vectors).with_context(|| format!("opening {}", vectors.display()))?;
            let vs = read_vectors(BufReader::new(file))?;
            let bad = verify_vectors(&vs);
            println!("{} vectors, {} mismatches", vs.len(), bad.len());
            if !bad.is_empty() {
                for i in bad.iter().take(10) {
                    println!("  mismatch at vector {i}");
                }
                return Err(CheckFailed.into());
            }
            Ok(())
        }
    }
}

fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let cfg = match spec.strip_prefix("builtin:") {
        Some(name) => builtin(name)?,
        None => ScenarioConfig::load(Path::new(spec))?,
    };
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_run(spec: &str, seed: Option<u64>, out: &Path, vectors: bool) -> Result<()> {
    let mut cfg = load_scenario(spec)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let output = run_scenario_with(&cfg, &RunOptions { record_vectors: vectors })?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut w = create(out, "trace.jsonl")?;
    output.trace.write_jsonl(&mut w)?;
    w.flush()?;
    let mut w = create(out, "report.json")?;
    writeln!(w, "{}", output.report.to_json())?;
    w.flush()?;
    write_series_csv(&series(&output.trace, cfg.delta())?, create(out, "series.csv")?)?;
    if vectors {
        let mut w = create(out, "vectors.jsonl")?;
        write_vectors(&mut w, &output.vectors)?;
        w.flush()?;
    }

    let r = &output.report;
    println!("scenario {} seed {} ({} rounds)", r.scenario, r.seed, r.rounds);
    println!("  validity {}  legality {}  safety {}", ok(r.validity.ok), ok(r.legality.ok), ok(r.safety.ok));
    match r.convergence.at_round {
        Some(at) => println!("  converged at round {at}"),
        None => println!("  not converged (final spread {})", r.final_spread),
    }
    println!("  condition satisfied in {}/{} phases", r.condition.satisfied_phases, r.condition.verdicts.len());
    for e in &r.expectations {
        println!("  expect {} = {}: got {} [{}]", e.name, e.expected, e.actual, ok(e.pass));
    }
    if !r.passed {
        return Err(CheckFailed.into());
    }
    Ok(())
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn cmd_check(path: &Path, delta: Option<f64>, mode: ConditionMode, strict: bool) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut trace = Trace::read_jsonl(BufReader::new(file))?;
    if let Some(d) = delta {
        let eps = trace.params().epsilon;
        if !(d > 0.0 && d <= eps / 2.0) {
            bail!("delta {d} outside (0, epsilon/2] with epsilon = {eps}");
        }
        trace.header.delta = d;
    }
    let report = build_report(&Expectations::default(), &trace)?;
    let properness = if strict { Properness::Strict } else { Properness::Retained };
    let condition = check_condition_all(&trace, trace.header.delta, mode, properness)?;
    let witnesses_ok = condition
        .verdicts
        .iter()
        .filter_map(|v| v.witness.as_ref().map(|w| (v.phase, w)))
        .all(|(k, w)| validate_witness(&trace, k, trace.header.delta, w).is_ok());
    let summary = serde_json::json!({
        "report": report,
        "condition_mode": condition,
        "condition_witnesses_valid": witnesses_ok,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if !(report.passed && witnesses_ok && condition.satisfied) {
        return Err(CheckFailed.into());
    }
    Ok(())
}

fn cmd_sweep(spec: &str, grid: &Path, seeds: u64, out: &Path) -> Result<()> {
    let template = load_scenario(spec)?;
    template.validate()?;
    let text = fs::read_to_string(grid).with_context(|| format!("reading {}", grid.display()))?;
    let grid = GridConfig::from_toml(&text)?;
    let report = sweep(&template, &grid, seeds)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_sweep_csv(&report, create(out, "sweep.csv")?)?;
    let mut w = create(out, "sweep.json")?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    w.flush()?;
    for c in &report.cells {
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "cell {:>3} [{}]: converged {}/{} (rate {:.3} ± {:.3}), condition phase rate {:.3}, errors {}",
            c.cell,
            params.join(", "),
            c.converged,
            c.runs,
            c.convergence_rate,
            c.convergence_rate_stderr,
            c.condition_phase_rate,
            c.errors.len()
        );
    }
    Ok(())
}
