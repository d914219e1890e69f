//! Mobility, per-round communication graphs, lossy delivery and joint graphs.
//!
//! A round starts with the mobility part: every node moves (or stays). The
//! communication graph is then evaluated once from the new positions under
//! a disk model, and all messages of the protocol part travel over it.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{NodeId, Round};
use crate::rng::{Channel, StreamSeed};
use crate::trace::Trace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("message {sender} -> {receiver} in round {round} does not follow an edge")]
    NotAnEdge { sender: NodeId, receiver: NodeId, round: Round },
    #[error("two messages {sender} -> {receiver} in round {round}")]
    DuplicateMessage { sender: NodeId, receiver: NodeId, round: Round },
    #[error("message {sender} -> {receiver} stamped round {message}, delivered in round {round}")]
    RoundMismatch { sender: NodeId, receiver: NodeId, message: Round, round: Round },
    #[error("loss rate {0} outside [0, 1]")]
    LossRate(f64),
    #[error("joint graph needs at least one round graph")]
    EmptyWindow,
    #[error("round graphs are not contiguous: {previous} followed by {next}")]
    NonContiguous { previous: Round, next: Round },
    #[error("round {round} is outside the trace (rounds 1..={last})")]
    RoundOutsideTrace { round: Round, last: Round },
    #[error("{0} is not a correct node of the trace")]
    NotCorrect(NodeId),
    #[error("invalid mobility: {0}")]
    Mobility(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Position {
    fn from(p: [f64; 2]) -> Self {
        Position { x: p[0], y: p[1] }
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position { x: p.x.clamp(0.0, self.width), y: p.y.clamp(0.0, self.height) }
    }

    pub fn diagonal(&self) -> f64 {
        (self.width * self.width + self.height * self.height).sqrt()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Position {
        Position { x: rng.gen_range(0.0..=self.width), y: rng.gen_range(0.0..=self.height) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPath {
    pub node: NodeId,
    /// `waypoints[0]` is the position before round 1; the node sits at
    /// `waypoints[r]` during round `r` and stays at the last waypoint once
    /// the list is exhausted.
    pub waypoints: Vec<Position>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobilityModel {
    Stationary,
    /// Each node walks toward a uniformly drawn target at a speed drawn from
    /// `[speed_min, speed_max]` (arena units per round), then draws a new one.
    RandomWaypoint {
        speed_min: f64,
        speed_max: f64,
    },
    /// Nodes without a path stay where they are.
    Scripted {
        paths: Vec<ScriptedPath>,
    },
    /// Every node jumps to a fresh uniform position every round.
    TeleportRandom,
}

impl MobilityModel {
    pub fn validate(&self, arena: &Arena, n: usize) -> Result<(), DynamicsError> {
        match self {
            MobilityModel::Stationary | MobilityModel::TeleportRandom => Ok(()),
            MobilityModel::RandomWaypoint { speed_min, speed_max } => {
                if !(*speed_min >= 0.0 && speed_min <= speed_max && speed_max.is_finite()) {
                    return Err(DynamicsError::Mobility(format!(
                        "speed range [{speed_min}, {speed_max}] is not a valid non-negative interval"
                    )));
                }
                Ok(())
            }
            MobilityModel::Scripted { paths } => {
                let mut seen = BTreeSet::new();
                for path in paths {
                    if path.node.index() >= n {
                        return Err(DynamicsError::Mobility(format!("path for unknown node {}", path.node)));
                    }
                    if !seen.insert(path.node) {
                        return Err(DynamicsError::Mobility(format!("two paths for {}", path.node)));
                    }
                    if path.waypoints.is_empty() {
                        return Err(DynamicsError::Mobility(format!("empty path for {}", path.node)));
                    }
                    if let Some(p) = path.waypoints.iter().find(|p| !arena.contains(p)) {
                        return Err(DynamicsError::Mobility(format!(
                            "waypoint ({}, {}) of {} lies outside the arena",
                            p.x, p.y, path.node
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Position of scripted nodes before round 1.
    pub fn scripted_start(&self, node: NodeId) -> Option<Position> {
        match self {
            MobilityModel::Scripted { paths } => paths.iter().find(|p| p.node == node).map(|p| p.waypoints[0]),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Leg {
    target: Position,
    speed: f64,
}

/// A mobility model together with the per-node state it needs between
/// rounds (the current random-waypoint leg).
#[derive(Clone, Debug)]
pub struct Mobility {
    model: MobilityModel,
    arena: Arena,
    legs: Vec<Option<Leg>>,
}

impl Mobility {
    pub fn new(model: MobilityModel, arena: Arena, n: usize) -> Self {
        Mobility { model, arena, legs: vec![None; n] }
    }

    pub fn model(&self) -> &MobilityModel {
        &self.model
    }

    /// Mobility part of round `r`.
    pub fn move_step(&mut self, positions: &[Position], r: Round, seed: &StreamSeed) -> Vec<Position> {
        match &self.model {
            MobilityModel::Stationary => positions.to_vec(),
            MobilityModel::TeleportRandom => (0..positions.len())
                .map(|i| {
                    let mut rng = seed.stream(Channel::Mobility, r, i as u64);
                    self.arena.sample(&mut rng)
                })
                .collect(),
            MobilityModel::Scripted { paths } => {
                let mut next = positions.to_vec();
                for path in paths {
                    let idx = (r as usize).min(path.waypoints.len() - 1);
                    next[path.node.index()] = path.waypoints[idx];
                }
                next
            }
            MobilityModel::RandomWaypoint { speed_min, speed_max } => {
                let (lo, hi) = (*speed_min, *speed_max);
                positions
                    .iter()
                    .enumerate()
                    .map(|(i, pos)| {
                        let leg = *self.legs[i].get_or_insert_with(|| {
                            let mut rng = seed.stream(Channel::Mobility, r, i as u64);
                            let target = self.arena.sample(&mut rng);
                            let speed = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                            Leg { target, speed }
                        });
                        let dist = pos.distance_sq(&leg.target).sqrt();
                        if dist <= leg.speed {
                            self.legs[i] = None;
                            leg.target
                        } else {
                            let t = leg.speed / dist;
                            self.arena.clamp(Position {
                                x: pos.x + (leg.target.x - pos.x) * t,
                                y: pos.y + (leg.target.y - pos.y) * t,
                            })
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Who can hear whom during one round. Edge `(j, i)` means `i` can receive
/// from `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundGraph {
    pub round: Round,
    pub n: usize,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

impl RoundGraph {
    pub fn new(round: Round, n: usize) -> Self {
        RoundGraph { round, n, edges: BTreeSet::new() }
    }

    pub fn from_edges(round: Round, n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        RoundGraph { round, n, edges: edges.into_iter().filter(|(a, b)| a != b).collect() }
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn out_neighbors(&self, from: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.range((from, NodeId(0))..=(from, NodeId(u32::MAX))).map(|&(_, to)| to)
    }

    pub fn in_neighbors(&self, to: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |&&(_, t)| t == to).map(|&(from, _)| from)
    }
}

/// Disk model: `j -> i` whenever the two nodes are at most `radius` apart.
pub fn build_round_graph(positions: &[Position], radius: f64, r: Round) -> RoundGraph {
    let r2 = radius * radius;
    let n = positions.len();
    let mut g = RoundGraph::new(r, n);
    for (j, pj) in positions.iter().enumerate() {
        for (i, pi) in positions.iter().enumerate() {
            if i != j && pj.distance_sq(pi) <= r2 {
                g.edges.insert((NodeId::from(j), NodeId::from(i)));
            }
        }
    }
    g
}

/// One value transmission over one directed link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueMessage {
    pub sender: NodeId,
    pub receiver: NodeId,
    #[serde(with = "crate::float")]
    pub value: f64,
    pub round: Round,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    /// Indexed by receiver, each ordered by sender.
    pub inboxes: Vec<Vec<ValueMessage>>,
    pub lost: Vec<ValueMessage>,
}

impl Delivery {
    pub fn delivered(&self) -> impl Iterator<Item = &ValueMessage> {
        self.inboxes.iter().flatten()
    }
}

/// Transmits every message of the round over `graph`, dropping each one
/// independently with probability `loss_rate`.
///
/// The loss draw for a message comes from a stream keyed by round and link,
/// so it does not depend on the order of the outbox.
pub fn deliver(
    graph: &RoundGraph,
    outbox: &[ValueMessage],
    loss_rate: f64,
    seed: &StreamSeed,
) -> Result<Delivery, DynamicsError> {
    if !(0.0..=1.0).contains(&loss_rate) {
        return Err(DynamicsError::LossRate(loss_rate));
    }
    let mut sorted = outbox.to_vec();
    sorted.sort_by_key(|m| (m.sender, m.receiver));
    let mut inboxes = vec![Vec::new(); graph.n];
    let mut lost = Vec::new();
    let mut prev: Option<(NodeId, NodeId)> = None;
    for m in sorted {
        if m.round != graph.round {
            return Err(DynamicsError::RoundMismatch {
                sender: m.sender,
                receiver: m.receiver,
                message: m.round,
                round: graph.round,
            });
        }
        if !graph.has_edge(m.sender, m.receiver) {
            return Err(DynamicsError::NotAnEdge { sender: m.sender, receiver: m.receiver, round: graph.round });
        }
        if prev == Some((m.sender, m.receiver)) {
            return Err(DynamicsError::DuplicateMessage { sender: m.sender, receiver: m.receiver, round: graph.round });
        }
        prev = Some((m.sender, m.receiver));
        let dropped = if loss_rate <= 0.0 {
            false
        } else if loss_rate >= 1.0 {
            true
        } else {
            let link = m.sender.0 as u64 * graph.n as u64 + m.receiver.0 as u64;
            seed.stream(Channel::Loss, graph.round, link).gen::<f64>() < loss_rate
        };
        if dropped {
            lost.push(m);
        } else {
            inboxes[m.receiver.index()].push(m);
        }
    }
    Ok(Delivery { inboxes, lost })
}

/// Union of the graphs of a contiguous round window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointGraph {
    /// Inclusive `(first, last)` rounds.
    pub window: (Round, Round),
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

pub fn joint_graph(graphs: &[RoundGraph]) -> Result<JointGraph, DynamicsError> {
    let first = graphs.first().ok_or(DynamicsError::EmptyWindow)?;
    let mut edges = BTreeSet::new();
    let mut prev = first.round;
    for (k, g) in graphs.iter().enumerate() {
        if k > 0 && g.round != prev + 1 {
            return Err(DynamicsError::NonContiguous { previous: prev, next: g.round });
        }
        prev = g.round;
        edges.extend(g.edges.iter().copied());
    }
    Ok(JointGraph { window: (first.round, prev), edges })
}

/// Senders whose values actually reached node `i` from its latest local new
/// starting round up to and including round `r`.
///
/// Only delivered messages with a finite payload count: an edge that carried
/// nothing, or carried a value the node discarded, communicates nothing.
pub fn joint_neighbor_set(trace: &Trace, i: NodeId, r: Round) -> Result<BTreeSet<NodeId>, DynamicsError> {
    let last = trace.rounds.len() as Round;
    if r < 1 || r > last {
        return Err(DynamicsError::RoundOutsideTrace { round: r, last });
    }
    let start = trace.node_record(i, r).ok_or(DynamicsError::NotCorrect(i))?.last_local_start;
    let mut senders = BTreeSet::new();
    for round in start..=r {
        let rec = &trace.rounds[(round - 1) as usize];
        senders.extend(rec.deliveries.iter().filter(|m| m.receiver == i && m.value.is_finite()).map(|m| m.sender));
    }
    Ok(senders)
}
