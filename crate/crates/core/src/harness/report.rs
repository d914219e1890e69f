//! Summary document of one run, derived from its trace alone.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_cardinality, check_condition_all, check_convergence, check_legality, check_monotone_envelopes,
    check_phase_progress, check_safety, check_validity, validate_witness, ConditionMode, ConditionSummary,
    ConvergenceReport, ProgressReport, Properness, ValueViolation, Verdict,
};
use crate::protocol::{ProtocolParams, Round};
use crate::trace::Trace;

use super::config::{ConditionExpectation, Expectations};
use super::HarnessError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalitySummary {
    pub ok: bool,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<ValueViolation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: u64,
    pub satisfied: bool,
    pub first_failure: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub params: ProtocolParams,
    pub delta: f64,
    pub rounds: Round,
    /// `n >= 3f + 1`.
    pub cardinality: bool,
    pub validity: Verdict,
    pub legality: LegalitySummary,
    pub safety: Verdict,
    /// Per-round envelopes; only reported when `rc = 1`.
    pub monotone: Option<Verdict>,
    pub convergence: ConvergenceReport,
    pub condition: ConditionSummary,
    pub infinitely_often: WindowSummary,
    /// Every satisfied phase's witness re-validated against the deliveries.
    pub witnesses_valid: bool,
    pub progress: ProgressReport,
    pub initial_spread: f64,
    pub final_spread: f64,
    /// No correct value changed during the run.
    pub values_constant: bool,
    pub expectations: Vec<ExpectationResult>,
    /// All range checks, witness checks and expectations passed.
    pub passed: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }
}

/// Runs every checker over `trace` and evaluates `expect` against the
/// verdicts.
pub fn build_report(expect: &Expectations, trace: &Trace) -> Result<RunReport, HarnessError> {
    let params = *trace.params();
    let delta = trace.header.delta;
    let table = trace.value_table();

    let legality = check_legality(trace);
    let condition = check_condition_all(trace, delta, ConditionMode::PerPhase, Properness::Retained)?;
    let window = ConditionMode::DEFAULT_WINDOW;
    let io = check_condition_all(trace, delta, ConditionMode::InfinitelyOften { window }, Properness::Retained)?;
    let witnesses_valid = condition
        .verdicts
        .iter()
        .filter_map(|v| v.witness.as_ref().map(|w| (v.phase, w)))
        .all(|(k, w)| validate_witness(trace, k, delta, w).is_ok());
    let convergence = check_convergence(trace, params.epsilon, delta)?;
    let values_constant = (2..=table.last()).all(|r| table.row(r) == table.row(1));

    let mut report = RunReport {
        schema: REPORT_SCHEMA_VERSION,
        scenario: trace.header.scenario.clone(),
        seed: trace.header.seed,
        params,
        delta,
        rounds: trace.last_round(),
        cardinality: check_cardinality(params.n, params.f),
        validity: check_validity(trace),
        legality: LegalitySummary {
            ok: legality.ok(),
            checked: legality.checked,
            violations: legality.violations.len(),
            first_violation: legality.violations.first().copied(),
        },
        safety: check_safety(trace),
        monotone: (params.rc == 1).then(|| check_monotone_envelopes(trace)),
        convergence,
        infinitely_often: WindowSummary { window, satisfied: io.satisfied, first_failure: io.first_failure },
        condition,
        witnesses_valid,
        progress: check_phase_progress(trace, delta, Properness::Retained)?,
        initial_spread: table.spread(1),
        final_spread: table.spread(table.last()),
        values_constant,
        expectations: Vec::new(),
        passed: false,
    };
    report.expectations = evaluate_expectations(expect, &report);
    report.passed = report.validity.ok
        && report.legality.ok
        && report.safety.ok
        && report.monotone.as_ref().is_none_or(|m| m.ok)
        && report.witnesses_valid
        && report.expectations.iter().all(|e| e.pass);
    Ok(report)
}

fn evaluate_expectations(e: &Expectations, report: &RunReport) -> Vec<ExpectationResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, expected: String, actual: String, pass: bool| {
        out.push(ExpectationResult { name: name.into(), expected, actual, pass });
    };
    if let Some(want) = e.converged {
        let got = report.convergence.reached;
        push("converged", want.to_string(), got.to_string(), want == got);
    }
    if let Some(want) = e.condition {
        let c = &report.condition;
        let (expected, pass) = match want {
            ConditionExpectation::All => ("all", c.satisfied),
            ConditionExpectation::None => ("none", c.none_satisfied()),
        };
        push("condition", expected.into(), format!("{}/{} phases", c.satisfied_phases, c.verdicts.len()), pass);
    }
    if let Some(want) = e.values_constant {
        let got = report.values_constant;
        push("values_constant", want.to_string(), got.to_string(), want == got);
    }
    out
}
