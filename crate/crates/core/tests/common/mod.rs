//! Shared test support: an independent reference for the reducing step and
//! random scenario generators.

#![allow(dead_code)]

use std::collections::BTreeSet;

use mabc::adversary::{Behavior, ScriptEntry, ScriptTable};
use mabc::dynamics::{MobilityModel, Position};
use mabc::harness::config::{AdversaryConfig, Expectations, NetworkConfig, PositionsSpec, ValuesSpec};
use mabc::harness::{ScenarioConfig, SCENARIO_SCHEMA_VERSION};
use mabc::NodeId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of the reference: `None` when the admission test fails,
/// otherwise the removed `(sender, value)` pairs (as a set) and the new
/// value.
pub type OracleResult = Option<(BTreeSet<(u32, i64)>, f64)>;

/// Brute-force reducing and averaging over integer-valued logs.
///
/// Works from the textual rule only: sort by (value, sender) via repeated
/// minimum extraction, take the `f` lowest and `f` highest positions, and
/// remove by set algebra. Integer inputs make the mean exact up to the
/// final division.
pub fn oracle(log: &[(u32, i64)], own: i64, f: usize) -> OracleResult {
    let x = log.iter().filter(|(_, v)| *v >= own).count();
    let y = log.iter().filter(|(_, v)| *v <= own).count();
    if x < f + 1 && y < f + 1 {
        return None;
    }
    let mut pool: Vec<(u32, i64)> = log.to_vec();
    let mut order = Vec::new();
    while !pool.is_empty() {
        let (idx, _) = pool.iter().enumerate().min_by(|(_, a), (_, b)| (a.1, a.0).cmp(&(b.1, b.0))).unwrap();
        order.push(pool.remove(idx));
    }
    let len = order.len();
    let small: BTreeSet<(u32, i64)> = order.iter().take(f).copied().collect();
    let big: BTreeSet<(u32, i64)> = order.iter().skip(len.saturating_sub(f)).copied().collect();
    let removed: BTreeSet<(u32, i64)> = if x > y {
        big.union(&small.iter().filter(|e| e.1 < own).copied().collect()).copied().collect()
    } else {
        small.union(&big.iter().filter(|e| e.1 > own).copied().collect()).copied().collect()
    };
    let kept: Vec<i64> = order.iter().filter(|e| !removed.contains(e)).map(|e| e.1).collect();
    let total: i64 = own + kept.iter().sum::<i64>();
    Some((removed, total as f64 / (kept.len() + 1) as f64))
}

/// Every multiset of size `0..=max_len` over `grid`, as sorted vectors.
pub fn multisets(grid: &[i64], max_len: usize) -> Vec<Vec<i64>> {
    fn rec(grid: &[i64], start: usize, left: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        out.push(cur.clone());
        if left == 0 {
            return;
        }
        for i in start..grid.len() {
            cur.push(grid[i]);
            rec(grid, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(grid, 0, max_len, &mut Vec::new(), &mut out);
    out
}

fn base(name: &str, n: usize, f: usize, rc: u64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: name.to_string(),
        description: String::new(),
        n,
        f,
        rc,
        epsilon: 0.05,
        delta: None,
        max_rounds: None,
        seed,
        network: NetworkConfig { width: 10.0, height: 10.0, radius: 20.0, loss_rate: 0.0 },
        mobility: MobilityModel::Stationary,
        positions: PositionsSpec::Uniform,
        initial_values: ValuesSpec::Uniform { low: 0.0, high: 1.0 },
        adversary: AdversaryConfig::default(),
        expect: Expectations::default(),
    }
}

/// The strategy kinds exercised by the randomized suites.
pub const STRATEGIES: &[&str] = &["silent", "fixed_value", "extreme_split", "random_legal", "scripted"];

fn behavior(kind: &str, rng: &mut ChaCha8Rng, byz: &[NodeId], n: usize, rounds: u64) -> Behavior {
    match kind {
        "silent" => Behavior::Silent,
        "fixed_value" => Behavior::FixedValue { value: *[-5.0, 0.5, 7.0].choose(rng).unwrap() },
        "extreme_split" => Behavior::ExtremeSplit { high: rng.gen_range(1.0..20.0), low: rng.gen_range(-20.0..0.0) },
        "random_legal" => Behavior::RandomLegal { low: -2.0, high: 3.0 },
        "scripted" => {
            let mut entries = Vec::new();
            for round in 1..=rounds.min(30) {
                for &b in byz {
                    for j in 0..n {
                        if j != b.index() && rng.gen_bool(0.5) {
                            entries.push(ScriptEntry {
                                round,
                                sender: b,
                                receiver: NodeId::from(j),
                                value: rng.gen_range(-10.0..10.0),
                            });
                        }
                    }
                }
            }
            Behavior::Scripted { table: ScriptTable { entries } }
        }
        other => panic!("unknown strategy {other}"),
    }
}

/// Random scenario for the range-property suites: `n <= 12`, `f <= 2`,
/// `rc <= 4`, mixed mobility, loss in {0, 0.3}, at most `f` Byzantine
/// nodes running `strategy`.
pub fn random_scenario(case: u64, strategy: &str, loss_rate: f64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + case);
    let n = rng.gen_range(1..=12usize);
    let f = rng.gen_range(0..=2usize);
    let rc = rng.gen_range(1..=4u64);
    let mut cfg = base(&format!("random_{case}"), n, f, rc, rng.gen());
    cfg.max_rounds = Some(rng.gen_range(20..=60));
    cfg.network.loss_rate = loss_rate;
    cfg.network.radius = rng.gen_range(2.0..15.0);
    cfg.mobility = match rng.gen_range(0..3) {
        0 => MobilityModel::Stationary,
        1 => MobilityModel::RandomWaypoint { speed_min: 0.5, speed_max: 3.0 },
        _ => MobilityModel::TeleportRandom,
    };
    let count = rng.gen_range(0..=f.min(n - 1));
    let mut ids: Vec<NodeId> = (0..n).map(NodeId::from).collect();
    ids.shuffle(&mut rng);
    let mut byz: Vec<NodeId> = ids[..count].to_vec();
    byz.sort();
    cfg.adversary.behavior = behavior(strategy, &mut rng, &byz, n, cfg.max_rounds.unwrap());
    cfg.adversary.byzantine = byz;
    if rng.gen_bool(0.3) {
        let values = (0..n - count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        cfg.initial_values = ValuesSpec::Explicit { values };
    }
    cfg
}

/// Dense random scenario meant to satisfy the convergence condition:
/// `n >= 3f + 1`, exactly `f` Byzantine nodes, lossless, and a radius that
/// keeps most nodes in range of each other.
pub fn dense_scenario(case: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0xde75e + case);
    let f = rng.gen_range(0..=2usize);
    let n = rng.gen_range(3 * f + 1..=(3 * f + 4).max(4));
    let rc = rng.gen_range(1..=3u64);
    let mut cfg = base(&format!("dense_{case}"), n, f, rc, rng.gen());
    cfg.epsilon = 0.01;
    cfg.max_rounds = Some(40 * rc);
    cfg.network.radius = *[20.0, 9.0, 6.0].choose(&mut rng).unwrap();
    if rng.gen_bool(0.5) {
        cfg.mobility = MobilityModel::RandomWaypoint { speed_min: 0.5, speed_max: 2.0 };
    }
    let mut ids: Vec<NodeId> = (0..n).map(NodeId::from).collect();
    ids.shuffle(&mut rng);
    let mut byz: Vec<NodeId> = ids[..f].to_vec();
    byz.sort();
    let kind = *STRATEGIES.choose(&mut rng).unwrap();
    cfg.adversary.behavior = behavior(kind, &mut rng, &byz, n, cfg.max_rounds.unwrap());
    cfg.adversary.byzantine = byz;
    // Half the cases draw from three levels so several nodes share an
    // extreme and phases where the extremes stay put actually occur.
    cfg.initial_values = if rng.gen_bool(0.5) {
        let values = (0..n - f).map(|_| *[0.0, 5.0, 10.0].choose(&mut rng).unwrap()).collect();
        ValuesSpec::Explicit { values }
    } else {
        ValuesSpec::Uniform { low: 0.0, high: 10.0 }
    };
    cfg
}

/// Sparse, tie-heavy scenario: nodes teleport every round in a small
/// radius and start at one of two levels, so several nodes share each
/// extreme and often miss each other. Phases where the extremes stay put
/// while the condition holds are common here.
pub fn stagnation_scenario(case: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a9 + case);
    let f = rng.gen_range(0..=2usize);
    let n = f + rng.gen_range(6..=10usize);
    let rc = rng.gen_range(1..=2u64);
    let mut cfg = base(&format!("stagnation_{case}"), n, f, rc, rng.gen());
    cfg.epsilon = 0.01;
    cfg.max_rounds = Some(40 * rc);
    cfg.network.radius = 4.0;
    cfg.mobility = MobilityModel::TeleportRandom;
    let mut ids: Vec<NodeId> = (0..n).map(NodeId::from).collect();
    ids.shuffle(&mut rng);
    let mut byz: Vec<NodeId> = ids[..f].to_vec();
    byz.sort();
    let kind = *STRATEGIES.choose(&mut rng).unwrap();
    cfg.adversary.behavior = behavior(kind, &mut rng, &byz, n, cfg.max_rounds.unwrap());
    cfg.adversary.byzantine = byz;
    let values = (0..n - f).map(|_| *[0.0, 10.0].choose(&mut rng).unwrap()).collect();
    cfg.initial_values = ValuesSpec::Explicit { values };
    cfg
}

pub fn point(x: f64, y: f64) -> Position {
    Position::new(x, y)
}

#[derive(Debug, Default)]
pub struct OracleSweep {
    pub cases: usize,
    pub admitted: usize,
    pub mismatches: Vec<String>,
    pub cardinality_violations: Vec<String>,
}

/// Compares `reduce` + `average` with [`oracle`] on every multiset of size
/// at most 7 over a 5-point grid, every own value on the grid, `f` in
/// {0, 1, 2} and three sender labelings (which decide ties).
pub fn reduce_oracle_sweep() -> OracleSweep {
    use mabc::protocol::{admission_test, average, count_relative, reduce, LogEntry, ValueLog};
    let grid = [0i64, 1, 2, 3, 4];
    let mut out = OracleSweep::default();
    for values in multisets(&grid, 7) {
        let len = values.len() as u32;
        let labelings: [Vec<u32>; 3] =
            [(0..len).collect(), (0..len).rev().collect(), (0..len).map(|i| (i * 5 + 3) % 11).collect()];
        for senders in &labelings {
            let pairs: Vec<(u32, i64)> = senders.iter().copied().zip(values.iter().copied()).collect();
            let log: ValueLog = pairs
                .iter()
                .map(|&(s, v)| LogEntry { sender: NodeId(s + 1), value: v as f64, recv_round: 1 })
                .collect();
            for own in grid {
                for f in 0..=2usize {
                    out.cases += 1;
                    let expected = oracle(&pairs.iter().map(|&(s, v)| (s + 1, v)).collect::<Vec<_>>(), own, f);
                    let (x, y) = count_relative(&log, own as f64);
                    let got = if admission_test(x, y, f) {
                        let red = reduce(&log, f, x, y, own as f64).expect("admitted");
                        let removed: BTreeSet<(u32, i64)> =
                            red.removed.iter().map(|e| (e.sender.0, e.value as i64)).collect();
                        let k = red.removed.len();
                        if k < f || k > 2 * f || red.survivors.is_empty() {
                            out.cardinality_violations.push(format!(
                                "log {values:?} own {own} f {f}: removed {k}, survivors {}",
                                red.survivors.len()
                            ));
                        }
                        Some((removed, average(&red.survivors, own as f64)))
                    } else {
                        None
                    };
                    if got.is_some() {
                        out.admitted += 1;
                    }
                    let same = match (&got, &expected) {
                        (None, None) => true,
                        (Some((ra, va)), Some((rb, vb))) => ra == rb && va.to_bits() == vb.to_bits(),
                        _ => false,
                    };
                    if !same {
                        out.mismatches
                            .push(format!("log {pairs:?} own {own} f {f}: got {got:?}, expected {expected:?}"));
                    }
                }
            }
        }
    }
    out
}
