//! Parameter grids over a scenario template, run across seeds in parallel.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::build_report;
use super::run::{simulate, RunOptions};
use super::{HarnessError, ScenarioConfig};

pub const GRID_SCHEMA_VERSION: u32 = 1;

/// Grid file: every key maps to the list of values it takes; cells are the
/// cartesian product, enumerated with keys in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
}

pub const GRID_KEYS: &[&str] = &["delta", "epsilon", "loss_rate", "max_rounds", "radius", "rc"];

impl GridConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let g: GridConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        if g.schema_version != GRID_SCHEMA_VERSION {
            return Err(HarnessError::Config(format!("unsupported grid schema_version {}", g.schema_version)));
        }
        if let Some(k) = g.grid.keys().find(|k| !GRID_KEYS.contains(&k.as_str())) {
            return Err(HarnessError::Config(format!("unknown grid key `{k}` (allowed: {})", GRID_KEYS.join(", "))));
        }
        if let Some((k, _)) = g.grid.iter().find(|(_, v)| v.is_empty()) {
            return Err(HarnessError::Config(format!("grid key `{k}` has no values")));
        }
        Ok(g)
    }

    /// Every cell as (key, value) pairs in key order. An empty grid has one
    /// empty cell.
    pub fn cells(&self) -> Vec<Vec<(String, f64)>> {
        let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (key, values) in &self.grid {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.push((key.clone(), v));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

fn as_count(key: &str, v: f64) -> Result<u64, HarnessError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(HarnessError::Config(format!("grid value {v} for `{key}` is not a non-negative integer")))
    }
}

/// The template with one cell's overrides applied.
pub fn apply_cell(template: &ScenarioConfig, cell: &[(String, f64)]) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = template.clone();
    for (key, v) in cell {
        match key.as_str() {
            "delta" => cfg.delta = Some(*v),
            "epsilon" => cfg.epsilon = *v,
            "loss_rate" => cfg.network.loss_rate = *v,
            "max_rounds" => cfg.max_rounds = Some(as_count(key, *v)?),
            "radius" => cfg.network.radius = *v,
            "rc" => cfg.rc = as_count(key, *v)?,
            other => return Err(HarnessError::Config(format!("unknown grid key `{other}`"))),
        }
    }
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub params: Vec<(String, f64)>,
    pub runs: usize,
    pub errors: Vec<String>,
    pub converged: usize,
    pub convergence_rate: f64,
    /// Binomial standard error of `convergence_rate`.
    pub convergence_rate_stderr: f64,
    pub mean_convergence_round: Option<f64>,
    /// Mean over runs of the fraction of phases satisfying the condition.
    pub condition_phase_rate: f64,
    /// Fraction of runs satisfying the condition in every phase.
    pub condition_all_rate: f64,
    /// Runs whose range checks all passed.
    pub checks_passed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
}

struct RunStats {
    converged_at: Option<u64>,
    phase_rate: f64,
    all_phases: bool,
    passed: bool,
}

fn one_run(cfg: &ScenarioConfig) -> Result<RunStats, HarnessError> {
    cfg.validate()?;
    let (trace, _) = simulate(cfg, &RunOptions::default())?;
    let report = build_report(&Default::default(), &trace)?;
    Ok(RunStats {
        converged_at: report.convergence.at_round,
        phase_rate: report.condition.satisfaction_rate(),
        all_phases: report.condition.satisfied,
        passed: report.passed,
    })
}

/// Runs every cell for seeds `template.seed + i`, `i < seeds`. Per-run
/// failures are collected in the cell summary.
pub fn sweep(template: &ScenarioConfig, grid: &GridConfig, seeds: u64) -> Result<SweepReport, HarnessError> {
    let seed_list: Vec<u64> = (0..seeds).map(|i| template.seed.wrapping_add(i)).collect();
    let cells = grid.cells();
    let configs: Vec<(usize, Result<ScenarioConfig, HarnessError>)> =
        cells.iter().enumerate().map(|(i, c)| (i, apply_cell(template, c))).collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| seed_list.iter().map(move |&s| (c, s))).collect();
    let results: Vec<(usize, u64, Result<RunStats, HarnessError>)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let res = match &configs[c].1 {
                Ok(cfg) => {
                    let mut cfg = cfg.clone();
                    cfg.seed = s;
                    one_run(&cfg)
                }
                Err(e) => Err(e.clone()),
            };
            (c, s, res)
        })
        .collect();

    let mut summaries = Vec::with_capacity(cells.len());
    for (c, params) in cells.into_iter().enumerate() {
        let mut errors = Vec::new();
        let mut stats = Vec::new();
        for (_, s, res) in results.iter().filter(|(cc, _, _)| *cc == c) {
            match res {
                Ok(st) => stats.push(st),
                Err(e) => errors.push(format!("seed {s}: {e}")),
            }
        }
        let runs = stats.len();
        let converged: Vec<u64> = stats.iter().filter_map(|s| s.converged_at).collect();
        let rate = |k: usize| if runs == 0 { 0.0 } else { k as f64 / runs as f64 };
        let p = rate(converged.len());
        summaries.push(CellSummary {
            cell: c,
            params,
            runs,
            errors,
            converged: converged.len(),
            convergence_rate: p,
            convergence_rate_stderr: if runs == 0 { 0.0 } else { (p * (1.0 - p) / runs as f64).sqrt() },
            mean_convergence_round: (!converged.is_empty())
                .then(|| converged.iter().sum::<u64>() as f64 / converged.len() as f64),
            condition_phase_rate: if runs == 0 {
                0.0
            } else {
                stats.iter().map(|s| s.phase_rate).sum::<f64>() / runs as f64
            },
            condition_all_rate: rate(stats.iter().filter(|s| s.all_phases).count()),
            checks_passed: stats.iter().filter(|s| s.passed).count(),
        });
    }
    Ok(SweepReport { scenario: template.name.clone(), seeds: seed_list, cells: summaries })
}

pub fn write_sweep_csv<W: Write>(report: &SweepReport, w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "cell",
        "params",
        "runs",
        "errors",
        "converged",
        "convergence_rate",
        "convergence_rate_stderr",
        "mean_convergence_round",
        "condition_phase_rate",
        "condition_all_rate",
        "checks_passed",
    ])?;
    for c in &report.cells {
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.write_record([
            c.cell.to_string(),
            params.join(";"),
            c.runs.to_string(),
            c.errors.len().to_string(),
            c.converged.to_string(),
            c.convergence_rate.to_string(),
            c.convergence_rate_stderr.to_string(),
            c.mean_convergence_round.map(|m| m.to_string()).unwrap_or_default(),
            c.condition_phase_rate.to_string(),
            c.condition_all_rate.to_string(),
            c.checks_passed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_a_sorted_cartesian_product() {
        let g =
            GridConfig::from_toml("schema_version = 1\n[grid]\nrc = [1, 2]\nloss_rate = [0.0, 0.3, 0.5]\n").unwrap();
        let cells = g.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], vec![("loss_rate".to_string(), 0.0), ("rc".to_string(), 1.0)]);
        assert_eq!(cells[1], vec![("loss_rate".to_string(), 0.0), ("rc".to_string(), 2.0)]);
        let empty = GridConfig::from_toml("schema_version = 1\n").unwrap();
        assert_eq!(empty.cells(), vec![Vec::new()]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(GridConfig::from_toml("schema_version = 1\n[grid]\nspeed = [1.0]\n").is_err());
        assert!(GridConfig::from_toml("schema_version = 1\n[grid]\nrc = []\n").is_err());
        assert!(GridConfig::from_toml("schema_version = 2\n").is_err());
    }
}
