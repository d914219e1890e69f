//! The sufficient convergence condition: in a phase, some correct node
//! holding an extreme value at the phase start gathers at least `f + 1`
//! proper values from its joint neighbors.
//!
//! A value counts when it sits in the node's merged log at some round of
//! the phase, which is exactly what the node can act on. In
//! [`Properness::Strict`] mode only values delivered in that very round
//! count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::groups::{is_proper, ExtremeGroup, PhaseBounds};
use super::{phase_start, AnalysisError};
use crate::dynamics::joint_neighbor_set;
use crate::protocol::{NodeId, Round};
use crate::trace::{Trace, ValueTable};

/// Which logged values may enter a witness set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Properness {
    /// Everything retained in the log at the witness round.
    #[default]
    Retained,
    /// Only values delivered in the witness round itself.
    Strict,
}

/// How per-phase verdicts aggregate over a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionMode {
    /// Every phase must satisfy the condition.
    PerPhase,
    /// Every run of `window` consecutive phases must contain a satisfying
    /// phase. A finite-horizon stand-in for "infinitely often".
    InfinitelyOften { window: u64 },
}

impl ConditionMode {
    pub const DEFAULT_WINDOW: u64 = 3;
}

impl std::str::FromStr for ConditionMode {
    type Err = String;

    /// Accepts `per-phase`, `io` and `io:<W>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-phase" => Ok(ConditionMode::PerPhase),
            "io" => Ok(ConditionMode::InfinitelyOften { window: Self::DEFAULT_WINDOW }),
            _ => {
                let w = s
                    .strip_prefix("io:")
                    .ok_or_else(|| format!("unknown mode `{s}` (expected per-phase or io:<W>)"))?;
                match w.parse::<u64>() {
                    Ok(window) if window >= 1 => Ok(ConditionMode::InfinitelyOften { window }),
                    _ => Err(format!("window `{w}` must be a positive integer")),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub node: NodeId,
    pub round: Round,
    pub observer: ExtremeGroup,
    pub properness: Properness,
    /// Senders with the proper value each supplied, ordered by sender.
    pub values: Vec<(NodeId, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub phase: u64,
    pub satisfied: bool,
    /// The correct values were already within epsilon at the phase start,
    /// so the condition holds trivially.
    pub vacuous: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub mode: ConditionMode,
    pub satisfied: bool,
    pub satisfied_phases: usize,
    pub verdicts: Vec<ConditionVerdict>,
    /// First phase of the first window without a satisfying phase
    /// (per-phase mode: the first unsatisfied phase).
    pub first_failure: Option<u64>,
}

impl ConditionSummary {
    pub fn none_satisfied(&self) -> bool {
        self.satisfied_phases == 0
    }

    pub fn satisfaction_rate(&self) -> f64 {
        if self.verdicts.is_empty() {
            0.0
        } else {
            self.satisfied_phases as f64 / self.verdicts.len() as f64
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0} is not a correct node of the trace")]
    NotCorrect(NodeId),
    #[error("{node} did not hold the {observer:?} value at the phase start")]
    NotExtreme { node: NodeId, observer: ExtremeGroup },
    #[error("witness round {round} lies outside the phase")]
    RoundOutsidePhase { round: Round },
    #[error("{got} values, at least {need} required")]
    TooFew { got: usize, need: usize },
    #[error("sender {0} listed twice or equal to the observer")]
    BadSender(NodeId),
    #[error("{sender} is not a joint neighbor of {node} at round {round}")]
    NotJointNeighbor { sender: NodeId, node: NodeId, round: Round },
    #[error("no delivery from {sender} carrying {value} is live in the log at round {round}")]
    NotDelivered { sender: NodeId, value: f64, round: Round },
    #[error("value {value} from {sender} is not proper")]
    NotProper { sender: NodeId, value: f64 },
}

fn phase_bounds(trace: &Trace, table: &ValueTable, phase: u64, delta: f64) -> Result<PhaseBounds, AnalysisError> {
    let params = trace.params();
    let start = phase_start(phase, params.rc);
    // The condition needs recorded logs, so the phase must start at or
    // before the last simulated round.
    if start > trace.last_round() {
        return Err(AnalysisError::PhaseBeyondTrace { phase, start, last: trace.last_round() });
    }
    PhaseBounds::from_table(table, phase, params.rc, delta, params.epsilon)
}

fn phase_rounds(trace: &Trace, bounds: &PhaseBounds) -> std::ops::RangeInclusive<Round> {
    let end = (bounds.start_round + trace.params().rc - 1).min(trace.last_round());
    bounds.start_round..=end
}

fn observer_group(bounds: &PhaseBounds, v: f64) -> Option<ExtremeGroup> {
    if v == bounds.vmin {
        Some(ExtremeGroup::Min)
    } else if v == bounds.vmax {
        Some(ExtremeGroup::Max)
    } else {
        None
    }
}

/// Per-phase verdict. The witness lists every proper value the first
/// qualifying node had at the first qualifying round.
pub fn check_condition(
    trace: &Trace,
    phase: u64,
    delta: f64,
    properness: Properness,
) -> Result<ConditionVerdict, AnalysisError> {
    condition_in_phase(trace, &trace.value_table(), phase, delta, properness)
}

pub(crate) fn condition_in_phase(
    trace: &Trace,
    table: &ValueTable,
    phase: u64,
    delta: f64,
    properness: Properness,
) -> Result<ConditionVerdict, AnalysisError> {
    let bounds = phase_bounds(trace, table, phase, delta)?;
    let params = trace.params();
    if bounds.spread() < params.epsilon {
        return Ok(ConditionVerdict { phase, satisfied: true, vacuous: true, witness: None });
    }
    let observers: Vec<(NodeId, ExtremeGroup)> = table
        .correct
        .iter()
        .zip(table.row(bounds.start_round))
        .filter_map(|(&id, &v)| observer_group(&bounds, v).map(|g| (id, g)))
        .collect();
    for r in phase_rounds(trace, &bounds) {
        for &(id, observer) in &observers {
            let Some(rec) = trace.node_record(id, r) else { continue };
            let values: Vec<(NodeId, f64)> = rec
                .log
                .iter()
                .filter(|e| properness == Properness::Retained || e.recv_round == r)
                .filter(|e| is_proper(e.value, observer, &bounds))
                .map(|e| (e.sender, e.value))
                .collect();
            if values.len() > params.f {
                let witness = Witness { node: id, round: r, observer, properness, values };
                return Ok(ConditionVerdict { phase, satisfied: true, vacuous: false, witness: Some(witness) });
            }
        }
    }
    Ok(ConditionVerdict { phase, satisfied: false, vacuous: false, witness: None })
}

/// Number of phases whose start round was simulated.
pub fn phase_count(trace: &Trace) -> u64 {
    trace.last_round().div_ceil(trace.params().rc)
}

pub fn check_condition_all(
    trace: &Trace,
    delta: f64,
    mode: ConditionMode,
    properness: Properness,
) -> Result<ConditionSummary, AnalysisError> {
    let table = trace.value_table();
    let verdicts = (0..phase_count(trace))
        .map(|k| condition_in_phase(trace, &table, k, delta, properness))
        .collect::<Result<Vec<_>, _>>()?;
    let satisfied_phases = verdicts.iter().filter(|v| v.satisfied).count();
    let first_failure = match mode {
        ConditionMode::PerPhase => verdicts.iter().find(|v| !v.satisfied).map(|v| v.phase),
        ConditionMode::InfinitelyOften { window } => {
            let w = (window.max(1) as usize).min(verdicts.len().max(1));
            verdicts.windows(w).find(|ws| ws.iter().all(|v| !v.satisfied)).map(|ws| ws[0].phase)
        }
    };
    Ok(ConditionSummary { mode, satisfied: first_failure.is_none(), satisfied_phases, verdicts, first_failure })
}

/// Re-derives a witness from the recorded deliveries alone.
pub fn validate_witness(trace: &Trace, phase: u64, delta: f64, w: &Witness) -> Result<(), WitnessError> {
    let bounds = phase_bounds(trace, &trace.value_table(), phase, delta)?;
    let start_value = trace.value(w.node, bounds.start_round).ok_or(WitnessError::NotCorrect(w.node))?;
    if trace.is_byzantine(w.node) {
        return Err(WitnessError::NotCorrect(w.node));
    }
    if observer_group(&bounds, start_value) != Some(w.observer) {
        return Err(WitnessError::NotExtreme { node: w.node, observer: w.observer });
    }
    if !phase_rounds(trace, &bounds).contains(&w.round) {
        return Err(WitnessError::RoundOutsidePhase { round: w.round });
    }
    let need = trace.params().f + 1;
    if w.values.len() < need {
        return Err(WitnessError::TooFew { got: w.values.len(), need });
    }
    let neighbors = joint_neighbor_set(trace, w.node, w.round).map_err(|_| WitnessError::NotCorrect(w.node))?;
    let since = trace.node_record(w.node, w.round).ok_or(WitnessError::NotCorrect(w.node))?.last_local_start;
    let first_round = match w.properness {
        Properness::Retained => since,
        Properness::Strict => w.round,
    };
    let mut seen = BTreeSet::new();
    for &(sender, value) in &w.values {
        if sender == w.node || !seen.insert(sender) {
            return Err(WitnessError::BadSender(sender));
        }
        if !neighbors.contains(&sender) {
            return Err(WitnessError::NotJointNeighbor { sender, node: w.node, round: w.round });
        }
        // The live entry is the most recent delivery since the last reset.
        let latest = (since..=w.round).rev().filter_map(|r| trace.round(r).map(|rec| (r, rec))).find_map(|(r, rec)| {
            rec.deliveries
                .iter()
                .find(|m| m.sender == sender && m.receiver == w.node && m.value.is_finite())
                .map(|m| (r, m.value))
        });
        match latest {
            Some((r, v)) if v == value && r >= first_round => {}
            _ => return Err(WitnessError::NotDelivered { sender, value, round: w.round }),
        }
        if !is_proper(value, w.observer, &bounds) {
            return Err(WitnessError::NotProper { sender, value });
        }
    }
    Ok(())
}
