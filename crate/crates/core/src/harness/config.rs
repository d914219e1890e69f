//! Scenario files: one TOML document per run configuration.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adversary::{AdversaryStrategy, Behavior, ScriptTable};
use crate::dynamics::{Arena, MobilityModel, Position};
use crate::protocol::{NodeId, ProtocolParams, Round};
use crate::rng::{Channel, StreamSeed};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub n: usize,
    pub f: usize,
    pub rc: u64,
    pub epsilon: f64,
    /// Interval width for the group analysis; `epsilon / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// `100 * rc * n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<Round>,
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkConfig,
    #[serde(default = "stationary")]
    pub mobility: MobilityModel,
    pub positions: PositionsSpec,
    #[serde(default)]
    pub initial_values: ValuesSpec,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default, skip_serializing_if = "Expectations::is_empty")]
    pub expect: Expectations,
}

fn stationary() -> MobilityModel {
    MobilityModel::Stationary
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    #[serde(default)]
    pub loss_rate: f64,
}

impl NetworkConfig {
    pub fn arena(&self) -> Arena {
        Arena { width: self.width, height: self.height }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PositionsSpec {
    /// One point per node, Byzantine nodes included.
    Explicit { points: Vec<Position> },
    /// Uniform over the arena.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValuesSpec {
    /// One value per correct node, in id order.
    Explicit { values: Vec<f64> },
    Uniform {
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for ValuesSpec {
    fn default() -> Self {
        ValuesSpec::Uniform { low: 0.0, high: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
    #[serde(default = "silent")]
    pub behavior: Behavior,
    /// Scripted table kept in a separate file, relative to the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_file: Option<String>,
    /// Allow more than `f` Byzantine nodes. Only for negative controls.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unchecked_budget: bool,
}

fn silent() -> Behavior {
    Behavior::Silent
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            byzantine: Vec::new(),
            behavior: Behavior::Silent,
            script_file: None,
            unchecked_budget: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionExpectation {
    /// Satisfied in every phase.
    All,
    /// Satisfied in no phase.
    None,
}

/// Verdicts a scenario documents about itself, checked after the run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionExpectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_constant: Option<bool>,
}

impl Expectations {
    pub fn is_empty(&self) -> bool {
        self.converged.is_none() && self.condition.is_none() && self.values_constant.is_none()
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        if cfg.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a scenario file and inlines its script file, if any.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(file) = cfg.adversary.script_file.take() {
            let script_path = path.parent().unwrap_or(Path::new(".")).join(&file);
            let script = std::fs::read_to_string(&script_path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", script_path.display())))?;
            let table = ScriptTable::from_toml(&script).map_err(|e| HarnessError::Config(e.to_string()))?;
            cfg.adversary.behavior = Behavior::Scripted { table };
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams { n: self.n, f: self.f, rc: self.rc, epsilon: self.epsilon }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.epsilon / 2.0)
    }

    pub fn max_rounds(&self) -> Round {
        self.max_rounds.unwrap_or(100 * self.rc * self.n as u64)
    }

    pub fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy {
            byzantine: self.adversary.byzantine.iter().copied().collect(),
            behavior: self.adversary.behavior.clone(),
        }
    }

    pub fn correct_ids(&self) -> Vec<NodeId> {
        let byz: BTreeSet<NodeId> = self.adversary.byzantine.iter().copied().collect();
        (0..self.n).map(NodeId::from).filter(|id| !byz.contains(id)).collect()
    }

    /// Every structural check, before any simulation.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.params().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let delta = self.delta();
        if !(delta > 0.0 && delta <= self.epsilon / 2.0) {
            return bad(format!("delta {delta} outside (0, epsilon/2] with epsilon = {}", self.epsilon));
        }
        if self.max_rounds() < 1 {
            return bad("max_rounds must be at least 1".into());
        }
        let net = &self.network;
        if !(net.width >= 0.0 && net.height >= 0.0 && net.width.is_finite() && net.height.is_finite()) {
            return bad(format!("arena {} x {} is not a finite non-negative rectangle", net.width, net.height));
        }
        if net.radius.is_nan() || net.radius < 0.0 {
            return bad(format!("radius {} must be non-negative", net.radius));
        }
        if !(0.0..=1.0).contains(&net.loss_rate) {
            return bad(format!("loss_rate {} outside [0, 1]", net.loss_rate));
        }
        self.mobility.validate(&net.arena(), self.n).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut byz = BTreeSet::new();
        if let Some(b) = self.adversary.byzantine.iter().find(|b| !byz.insert(**b)) {
            return bad(format!("Byzantine node {b} listed twice"));
        }
        self.strategy()
            .validate(self.n, self.f, !self.adversary.unchecked_budget)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let correct = self.correct_ids().len();
        if correct == 0 {
            return bad("at least one node must be correct".into());
        }
        if let PositionsSpec::Explicit { points } = &self.positions {
            if points.len() != self.n {
                return bad(format!("{} explicit positions for {} nodes", points.len(), self.n));
            }
            if let Some(p) = points.iter().find(|p| !net.arena().contains(p)) {
                return bad(format!("position ({}, {}) lies outside the arena", p.x, p.y));
            }
        }
        match &self.initial_values {
            ValuesSpec::Explicit { values } => {
                if values.len() != correct {
                    return bad(format!("{} initial values for {correct} correct nodes", values.len()));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return bad(format!("initial value {v} is not finite"));
                }
            }
            ValuesSpec::Uniform { low, high } => {
                if !(low <= high && low.is_finite() && high.is_finite()) {
                    return bad(format!("initial value range [{low}, {high}] is empty or unbounded"));
                }
            }
        }
        Ok(())
    }

    /// Positions before round 1. Scripted paths override the spec.
    pub fn initial_positions(&self, seed: &StreamSeed) -> Vec<Position> {
        let arena = self.network.arena();
        let base: Vec<Position> = match &self.positions {
            PositionsSpec::Explicit { points } => points.clone(),
            PositionsSpec::Uniform => {
                (0..self.n).map(|i| arena.sample(&mut seed.stream(Channel::Init, 0, i as u64))).collect()
            }
        };
        base.into_iter().enumerate().map(|(i, p)| self.mobility.scripted_start(NodeId::from(i)).unwrap_or(p)).collect()
    }

    /// Values of the correct nodes, in id order.
    pub fn initial_values(&self, seed: &StreamSeed) -> Vec<f64> {
        match &self.initial_values {
            ValuesSpec::Explicit { values } => values.clone(),
            ValuesSpec::Uniform { low, high } => self
                .correct_ids()
                .into_iter()
                .map(|id| {
                    let mut rng = seed.stream(Channel::Init, 1, id.0 as u64);
                    if high > low {
                        rng.gen_range(*low..=*high)
                    } else {
                        *low
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "tiny"
n = 4
f = 1
rc = 2
epsilon = 0.1
seed = 3

[network]
width = 10.0
height = 10.0
radius = 4.0

[positions]
kind = "uniform"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.delta(), 0.05);
        assert_eq!(cfg.max_rounds(), 800);
        assert_eq!(cfg.mobility, MobilityModel::Stationary);
        assert_eq!(cfg.initial_values, ValuesSpec::Uniform { low: 0.0, high: 1.0 });
        let seed = StreamSeed(cfg.seed);
        let vals = cfg.initial_values(&seed);
        assert_eq!(vals.len(), 4);
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(vals, cfg.initial_values(&seed));
        assert!(cfg.initial_positions(&seed).iter().all(|p| cfg.network.arena().contains(p)));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let with = |extra: &str| ScenarioConfig::from_toml(&format!("{MINIMAL}{extra}"));
        let check = |cfg: ScenarioConfig| cfg.validate().unwrap_err().to_string();
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.delta = Some(0.2);
        assert!(check(cfg).contains("delta"));
        let cfg = with("[initial_values]\nkind = \"explicit\"\nvalues = [1.0, 2.0]\n").unwrap();
        assert!(check(cfg).contains("initial values"));
        let cfg = with("[adversary]\nbyzantine = [0, 1]\n").unwrap();
        assert!(check(cfg).contains("exceed"));
        let cfg = with("[adversary]\nbyzantine = [0, 1]\nunchecked_budget = true\n").unwrap();
        cfg.validate().unwrap();
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.network.loss_rate = 1.5;
        assert!(check(cfg).contains("loss_rate"));
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.n = 1;
        cfg.f = 0;
        cfg.adversary.byzantine = vec![NodeId(0)];
        cfg.adversary.unchecked_budget = true;
        assert!(check(cfg).contains("correct"));
        assert!(matches!(ScenarioConfig::from_toml(&format!("bogus = 1\n{MINIMAL}")), Err(HarnessError::Parse(_))));
        assert!(ScenarioConfig::from_toml(&MINIMAL.replace("schema_version = 1", "schema_version = 9")).is_err());
    }
}
