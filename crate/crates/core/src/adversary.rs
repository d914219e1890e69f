//! Byzantine message generation.
//!
//! All Byzantine nodes of a run follow one colluding behavior. They obey the
//! same radio range as correct nodes, may send a different value to every
//! receiver, and see everything that happened in earlier rounds as well as
//! the correct values at the start of the current round.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{RoundGraph, ValueMessage};
use crate::protocol::{NodeId, Round};
use crate::rng::{Channel, StreamSeed};
use crate::trace::RoundRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("{0} is not in the Byzantine set")]
    NotByzantine(NodeId),
    #[error("{count} Byzantine nodes exceed the bound f = {f}")]
    OverBudget { count: usize, f: usize },
    #[error("Byzantine node {0} outside the system of {1} nodes")]
    UnknownNode(NodeId, usize),
    #[error("invalid script entry: {0}")]
    Script(String),
    #[error("invalid behavior: {0}")]
    Behavior(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub round: Round,
    pub sender: NodeId,
    pub receiver: NodeId,
    #[serde(with = "crate::float")]
    pub value: f64,
}

/// Per-round, per-receiver values. Rounds and links without an entry are
/// silent; entries whose receiver is out of range that round are not
/// transmitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptTable {
    #[serde(default, rename = "entry")]
    pub entries: Vec<ScriptEntry>,
}

impl ScriptTable {
    pub fn lookup(&self, round: Round, sender: NodeId, receiver: NodeId) -> Option<f64> {
        self.entries.iter().find(|e| e.round == round && e.sender == sender && e.receiver == receiver).map(|e| e.value)
    }

    pub fn from_toml(text: &str) -> Result<Self, AdversaryError> {
        toml::from_str(text).map_err(|e| AdversaryError::Script(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    Silent,
    FixedValue {
        value: f64,
    },
    /// `high` to receivers whose phase-start value lies in the upper half of
    /// the phase-start range, `low` to the rest.
    ExtremeSplit {
        high: f64,
        low: f64,
    },
    /// A fresh uniform draw from `[low, high]` for every receiver and round.
    RandomLegal {
        low: f64,
        high: f64,
    },
    Scripted {
        #[serde(default)]
        table: ScriptTable,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryStrategy {
    pub byzantine: BTreeSet<NodeId>,
    pub behavior: Behavior,
}

impl AdversaryStrategy {
    pub fn silent() -> Self {
        AdversaryStrategy { byzantine: BTreeSet::new(), behavior: Behavior::Silent }
    }

    /// Checks the strategy against an `n`-node system with bound `f`.
    /// `enforce_budget = false` admits more than `f` Byzantine nodes, which
    /// is only meaningful for negative-control runs.
    pub fn validate(&self, n: usize, f: usize, enforce_budget: bool) -> Result<(), AdversaryError> {
        if enforce_budget && self.byzantine.len() > f {
            return Err(AdversaryError::OverBudget { count: self.byzantine.len(), f });
        }
        if let Some(b) = self.byzantine.iter().find(|b| b.index() >= n) {
            return Err(AdversaryError::UnknownNode(*b, n));
        }
        match &self.behavior {
            Behavior::RandomLegal { low, high } if !(low <= high && low.is_finite() && high.is_finite()) => {
                Err(AdversaryError::Behavior(format!("random range [{low}, {high}] is empty or unbounded")))
            }
            Behavior::Scripted { table } => {
                for e in &table.entries {
                    if e.round == 0 {
                        return Err(AdversaryError::Script("round numbers start at 1".into()));
                    }
                    if !self.byzantine.contains(&e.sender) {
                        return Err(AdversaryError::Script(format!("sender {} is not Byzantine", e.sender)));
                    }
                    if e.receiver.index() >= n || e.receiver == e.sender {
                        return Err(AdversaryError::Script(format!(
                            "receiver {} of round {} is not a valid target",
                            e.receiver, e.round
                        )));
                    }
                }
                let mut keys = BTreeSet::new();
                if let Some(e) = table.entries.iter().find(|e| !keys.insert((e.round, e.sender, e.receiver))) {
                    return Err(AdversaryError::Script(format!(
                        "two entries for {} -> {} in round {}",
                        e.sender, e.receiver, e.round
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Read-only world view handed to the adversary.
#[derive(Clone, Copy, Debug)]
pub struct AdversaryView<'a> {
    pub round: Round,
    /// Correct values at the start of this round, indexed by node id
    /// (`None` for Byzantine nodes).
    pub current: &'a [Option<f64>],
    /// Correct values at the start of the current phase.
    pub phase_start: &'a [Option<f64>],
    /// All completed rounds.
    pub history: &'a [RoundRecord],
    pub seed: StreamSeed,
}

/// Messages Byzantine node `b` transmits in `graph.round`: at most one per
/// out-neighbor.
pub fn byzantine_outbox(
    strategy: &AdversaryStrategy,
    b: NodeId,
    graph: &RoundGraph,
    view: &AdversaryView<'_>,
) -> Result<Vec<ValueMessage>, AdversaryError> {
    if !strategy.byzantine.contains(&b) {
        return Err(AdversaryError::NotByzantine(b));
    }
    let r = graph.round;
    let msg = |receiver: NodeId, value: f64| ValueMessage { sender: b, receiver, value, round: r };
    let out = match &strategy.behavior {
        Behavior::Silent => Vec::new(),
        Behavior::FixedValue { value } => graph.out_neighbors(b).map(|j| msg(j, *value)).collect(),
        Behavior::ExtremeSplit { high, low } => {
            let (lo, hi) = view
                .phase_start
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let mid = lo + (hi - lo) / 2.0;
            graph
                .out_neighbors(b)
                .filter_map(|j| {
                    let v = view.phase_start.get(j.index()).copied().flatten()?;
                    Some(msg(j, if v >= mid { *high } else { *low }))
                })
                .collect()
        }
        Behavior::RandomLegal { low, high } => graph
            .out_neighbors(b)
            .map(|j| {
                let key = b.0 as u64 * graph.n as u64 + j.0 as u64;
                let mut rng = view.seed.stream(Channel::Adversary, r, key);
                let v = if high > low { rng.gen_range(*low..=*high) } else { *low };
                msg(j, v)
            })
            .collect(),
        Behavior::Scripted { table } => {
            graph.out_neighbors(b).filter_map(|j| table.lookup(r, b, j).map(|v| msg(j, v))).collect()
        }
    };
    Ok(out)
}
