//! The per-node state machine.
//!
//! Each correct node keeps its current value and a log of the most recent
//! value heard from every neighbor since its last reset. A round broadcasts
//! the current value, merges the inbox into the log and, when enough values
//! sit on one side of the node's own value, discards the extremes and moves
//! to the average of what survived. The log is emptied after every update
//! and unconditionally at the end of every `rc`-round phase.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ValueMessage;

pub mod vectors;

/// Round numbers start at 1.
pub type Round = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error("reduce called although the admission test fails (x={x}, y={y}, f={f})")]
    AdmissionNotMet { x: usize, y: usize, f: usize },
    #[error("inbox of {node} contains a message from itself")]
    SelfMessage { node: NodeId },
    #[error("inbox of {node} contains two messages from {sender}")]
    DuplicateSender { node: NodeId, sender: NodeId },
    #[error("inbox of {node} contains a message addressed to {receiver}")]
    WrongReceiver { node: NodeId, receiver: NodeId },
    #[error("message for round {message} delivered in round {round}")]
    RoundMismatch { round: Round, message: Round },
    #[error("sender {sender} outside the system of {n} nodes")]
    UnknownSender { sender: NodeId, n: usize },
    #[error("state of {node} starts at round {last_local_start}, cannot step round {round}")]
    StaleState { node: NodeId, last_local_start: Round, round: Round },
    #[error("non-finite value {0} for a node state")]
    NonFiniteState(f64),
}

/// Static parameters shared by every correct node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub f: usize,
    /// Maximum number of rounds a value may stay in a log.
    pub rc: u64,
    pub epsilon: f64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n < 1 {
            return Err(ProtocolError::InvalidParams("n must be at least 1".into()));
        }
        if self.rc < 1 {
            return Err(ProtocolError::InvalidParams("rc must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ProtocolError::InvalidParams(format!(
                "epsilon must be a positive finite number, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// `n >= 3f + 1`. Below that bound the extreme-holding nodes may never
    /// collect enough values that move them.
    pub fn meets_cardinality(&self) -> bool {
        crate::analysis::check_cardinality(self.n, self.f)
    }
}

/// One retained value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub sender: NodeId,
    pub value: f64,
    pub recv_round: Round,
}

/// The multiset of values a node has gathered, at most one per sender.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<LogEntry>", try_from = "Vec<LogEntry>")]
pub struct ValueLog {
    entries: BTreeMap<NodeId, LogEntry>,
}

impl ValueLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sender: NodeId) -> Option<&LogEntry> {
        self.entries.get(&sender)
    }

    /// Entries ordered by sender id.
    pub fn iter(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.values()
    }

    pub fn senders(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    /// Most-recent-wins insert. An entry older than the one already held for
    /// the same sender is ignored; returns the entry that was displaced.
    pub fn insert(&mut self, entry: LogEntry) -> Option<LogEntry> {
        match self.entries.get(&entry.sender) {
            Some(held) if held.recv_round > entry.recv_round => None,
            _ => self.entries.insert(entry.sender, entry),
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Entries in the total order used by the reducing step: by value, then
    /// by sender id.
    pub fn sorted(&self) -> Vec<LogEntry> {
        let mut v: Vec<LogEntry> = self.entries.values().copied().collect();
        v.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.sender.cmp(&b.sender)));
        v
    }
}

impl From<ValueLog> for Vec<LogEntry> {
    fn from(log: ValueLog) -> Self {
        log.entries.into_values().collect()
    }
}

impl TryFrom<Vec<LogEntry>> for ValueLog {
    type Error = String;

    fn try_from(v: Vec<LogEntry>) -> Result<Self, Self::Error> {
        let mut entries = BTreeMap::new();
        for e in v {
            if !e.value.is_finite() {
                return Err(format!("non-finite log value from {}", e.sender));
            }
            if entries.insert(e.sender, e).is_some() {
                return Err(format!("two log entries from {}", e.sender));
            }
        }
        Ok(ValueLog { entries })
    }
}

impl FromIterator<LogEntry> for ValueLog {
    fn from_iter<T: IntoIterator<Item = LogEntry>>(iter: T) -> Self {
        let mut log = ValueLog::new();
        for e in iter {
            log.insert(e);
        }
        log
    }
}

/// State of one correct node between rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub value: f64,
    pub log: ValueLog,
    /// Latest local new starting round: 1, or the round after the most
    /// recent log reset.
    pub last_local_start: Round,
}

impl NodeState {
    pub fn new(id: NodeId, value: f64) -> Result<Self, ProtocolError> {
        if !value.is_finite() {
            return Err(ProtocolError::NonFiniteState(value));
        }
        Ok(NodeState { id, value, log: ValueLog::new(), last_local_start: 1 })
    }
}

/// Number of logged values `>= own` and `<= own`. Values equal to `own`
/// count on both sides.
pub fn count_relative(log: &ValueLog, own: f64) -> (usize, usize) {
    log.iter().fold((0, 0), |(x, y), e| (x + usize::from(e.value >= own), y + usize::from(e.value <= own)))
}

/// At least `f + 1` values on one side of the node's own value.
pub fn admission_test(x: usize, y: usize, f: usize) -> bool {
    x > f || y > f
}

/// Result of the reducing step, both halves in the log's sort order.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub survivors: Vec<LogEntry>,
    pub removed: Vec<LogEntry>,
}

/// Discards between `f` and `2f` extreme entries.
///
/// `B` is the top `f` and `S` the bottom `f` entries of the sorted log; the
/// two ranges overlap when the log holds fewer than `2f` entries. When
/// `x > y` all of `B` goes together with the members of `S` below `own`;
/// otherwise all of `S` goes together with the members of `B` above `own`.
pub fn reduce(log: &ValueLog, f: usize, x: usize, y: usize, own: f64) -> Result<Reduction, ProtocolError> {
    if !admission_test(x, y, f) {
        return Err(ProtocolError::AdmissionNotMet { x, y, f });
    }
    let sorted = log.sorted();
    let len = sorted.len();
    let top_start = len.saturating_sub(f);
    let bottom_end = f.min(len);
    let drop_top_side = x > y;

    let mut survivors = Vec::with_capacity(len);
    let mut removed = Vec::with_capacity(2 * f);
    for (idx, entry) in sorted.into_iter().enumerate() {
        let in_top = idx >= top_start;
        let in_bottom = idx < bottom_end;
        let drop = if drop_top_side {
            in_top || (in_bottom && entry.value < own)
        } else {
            in_bottom || (in_top && entry.value > own)
        };
        if drop {
            removed.push(entry);
        } else {
            survivors.push(entry);
        }
    }
    Ok(Reduction { survivors, removed })
}

/// Equal-weight mean of `own` and the survivors.
///
/// The result is clamped to the hull of its inputs so that rounding in the
/// summation can never place it outside the range of the averaged values.
pub fn average(survivors: &[LogEntry], own: f64) -> f64 {
    let mut sum = own;
    let mut lo = own;
    let mut hi = own;
    for e in survivors {
        sum += e.value;
        lo = lo.min(e.value);
        hi = hi.max(e.value);
    }
    (sum / (survivors.len() + 1) as f64).clamp(lo, hi)
}

/// `r = k * rc + 1` for some `k >= 0`: every correct log is empty when such
/// a round starts.
pub fn is_common_new_start(r: Round, rc: u64) -> bool {
    r >= 1 && rc >= 1 && (r - 1).is_multiple_of(rc)
}

/// Everything one call to [`step_round`] produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: NodeState,
    /// Value sent to the neighbors this round (the value held at round start).
    pub broadcast: f64,
    /// The log after merging the inbox, before reducing.
    pub merged: ValueLog,
    /// Present when the admission test passed and the value was recomputed.
    pub reduction: Option<Reduction>,
    /// Whether the log was emptied at the end of the round.
    pub reset: bool,
    /// Messages dropped at ingestion because their payload was not finite.
    pub discarded: usize,
}

impl StepOutcome {
    pub fn updated(&self) -> bool {
        self.reduction.is_some()
    }
}

/// One protocol part of round `r` for one correct node.
pub fn step_round(
    state: &NodeState,
    inbox: &[ValueMessage],
    r: Round,
    params: &ProtocolParams,
) -> Result<StepOutcome, ProtocolError> {
    if r < state.last_local_start || r == 0 {
        return Err(ProtocolError::StaleState { node: state.id, last_local_start: state.last_local_start, round: r });
    }
    let broadcast = state.value;

    let mut log = state.log.clone();
    let mut seen = Vec::with_capacity(inbox.len());
    let mut discarded = 0;
    for msg in inbox {
        if msg.sender == state.id {
            return Err(ProtocolError::SelfMessage { node: state.id });
        }
        if msg.receiver != state.id {
            return Err(ProtocolError::WrongReceiver { node: state.id, receiver: msg.receiver });
        }
        if msg.round != r {
            return Err(ProtocolError::RoundMismatch { round: r, message: msg.round });
        }
        if msg.sender.index() >= params.n {
            return Err(ProtocolError::UnknownSender { sender: msg.sender, n: params.n });
        }
        if seen.contains(&msg.sender) {
            return Err(ProtocolError::DuplicateSender { node: state.id, sender: msg.sender });
        }
        seen.push(msg.sender);
        if !msg.value.is_finite() {
            discarded += 1;
            continue;
        }
        log.insert(LogEntry { sender: msg.sender, value: msg.value, recv_round: r });
    }
    let merged = log.clone();

    let (x, y) = count_relative(&log, state.value);
    let mut next = NodeState { id: state.id, value: state.value, log, last_local_start: state.last_local_start };
    let mut reduction = None;
    let reset;
    if admission_test(x, y, params.f) {
        let red = reduce(&next.log, params.f, x, y, state.value)?;
        next.value = average(&red.survivors, state.value);
        reduction = Some(red);
        reset = true;
    } else {
        reset = r.is_multiple_of(params.rc);
    }
    if reset {
        next.log.clear();
        next.last_local_start = r + 1;
    }
    Ok(StepOutcome { state: next, broadcast, merged, reduction, reset, discarded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_of(values: &[f64]) -> ValueLog {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| LogEntry { sender: NodeId(i as u32 + 1), value: v, recv_round: 1 })
            .collect()
    }

    fn values(entries: &[LogEntry]) -> Vec<f64> {
        entries.iter().map(|e| e.value).collect()
    }

    fn msg(sender: u32, receiver: u32, value: f64, round: Round) -> ValueMessage {
        ValueMessage { sender: NodeId(sender), receiver: NodeId(receiver), value, round }
    }

    fn params(n: usize, f: usize, rc: u64) -> ProtocolParams {
        ProtocolParams { n, f, rc, epsilon: 0.1 }
    }

    #[test]
    fn count_relative_examples() {
        assert_eq!(count_relative(&log_of(&[3.0, 5.0, 5.0, 7.0]), 5.0), (3, 3));
        assert_eq!(count_relative(&ValueLog::new(), 0.0), (0, 0));
        assert_eq!(count_relative(&log_of(&[1.0, 4.0, 9.0]), 5.0), (1, 2));
    }

    #[test]
    fn admission_examples() {
        assert!(admission_test(1, 2, 1));
        assert!(!admission_test(1, 1, 1));
        assert!(admission_test(0, 1, 0));
        assert!(!admission_test(0, 0, 0));
    }

    #[test]
    fn reduce_case_b_removes_small_side_and_large_outliers() {
        let log = log_of(&[1.0, 4.0, 9.0]);
        let red = reduce(&log, 1, 1, 2, 5.0).unwrap();
        assert_eq!(values(&red.survivors), vec![4.0]);
        assert_eq!(values(&red.removed), vec![1.0, 9.0]);
    }

    #[test]
    fn reduce_tie_goes_to_else_branch() {
        let log = log_of(&[2.0, 3.0, 8.0, 9.0]);
        let red = reduce(&log, 1, 2, 2, 5.0).unwrap();
        assert_eq!(values(&red.survivors), vec![3.0, 8.0]);
    }

    #[test]
    fn reduce_case_a_keeps_small_values_not_below_own() {
        // x = 3 > y = 1: top one goes, the bottom one survives because 5 >= 5.
        let log = log_of(&[5.0, 6.0, 7.0]);
        let red = reduce(&log, 1, 3, 1, 5.0).unwrap();
        assert_eq!(values(&red.survivors), vec![5.0, 6.0]);
    }

    #[test]
    fn reduce_with_zero_faults_removes_nothing() {
        let log = log_of(&[1.0, 2.0, 3.0]);
        let red = reduce(&log, 0, 3, 0, 0.0).unwrap();
        assert_eq!(red.survivors.len(), 3);
        assert!(red.removed.is_empty());
    }

    #[test]
    fn reduce_rejects_failed_admission() {
        let log = log_of(&[4.0]);
        assert_eq!(reduce(&log, 1, 1, 0, 5.0), Err(ProtocolError::AdmissionNotMet { x: 1, y: 0, f: 1 }));
    }

    #[test]
    fn reduce_breaks_value_ties_by_sender() {
        // Two entries with value 9 from senders 3 and 4: B (f=1) is sender 4.
        let log: ValueLog = [(4u32, 9.0), (3, 9.0), (1, 0.0), (2, 6.0)]
            .iter()
            .map(|&(s, v)| LogEntry { sender: NodeId(s), value: v, recv_round: 1 })
            .collect();
        let red = reduce(&log, 1, 3, 1, 5.0).unwrap();
        assert_eq!(red.removed.iter().map(|e| e.sender.0).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn reduce_overlapping_ranges_remove_once() {
        // f = 2 with three entries: B = idx {1,2}, S = idx {0,1}.
        let log = log_of(&[6.0, 7.0, 8.0]);
        let red = reduce(&log, 2, 3, 0, 5.0).unwrap();
        assert_eq!(values(&red.survivors), vec![6.0]);
        assert_eq!(red.removed.len(), 2);
    }

    #[test]
    fn average_examples() {
        let e = |v| LogEntry { sender: NodeId(1), value: v, recv_round: 1 };
        assert_eq!(average(&[e(4.0)], 5.0), 4.5);
        assert_eq!(average(&[], 7.0), 7.0);
        assert_eq!(average(&[e(3.0), e(8.0)], 5.0), 16.0 / 3.0);
    }

    #[test]
    fn average_never_leaves_input_hull() {
        let e = |v| LogEntry { sender: NodeId(1), value: v, recv_round: 1 };
        // 0.1 + 0.1 + 0.1 rounds above 0.3.
        let a = average(&[e(0.1), e(0.1)], 0.1);
        assert!(a <= 0.1, "{a}");
    }

    #[test]
    fn step_updates_when_admitted() {
        let s = NodeState::new(NodeId(0), 5.0).unwrap();
        let inbox = [msg(1, 0, 1.0, 2), msg(2, 0, 4.0, 2), msg(3, 0, 9.0, 2)];
        let out = step_round(&s, &inbox, 2, &params(4, 1, 4)).unwrap();
        assert_eq!(out.broadcast, 5.0);
        assert_eq!(out.state.value, 4.5);
        assert!(out.state.log.is_empty());
        assert_eq!(out.state.last_local_start, 3);
        assert!(out.updated() && out.reset);
        assert_eq!(out.merged.len(), 3);
    }

    #[test]
    fn step_carries_log_when_not_admitted() {
        let s = NodeState::new(NodeId(0), 5.0).unwrap();
        let out = step_round(&s, &[msg(2, 0, 4.0, 3)], 3, &params(4, 1, 4)).unwrap();
        assert_eq!(out.state.value, 5.0);
        assert_eq!(out.state.log.len(), 1);
        assert_eq!(out.state.log.get(NodeId(2)).unwrap().value, 4.0);
        assert_eq!(out.state.last_local_start, 1);
        assert!(!out.reset);
    }

    #[test]
    fn step_resets_at_phase_end() {
        let mut s = NodeState::new(NodeId(0), 5.0).unwrap();
        s.log.insert(LogEntry { sender: NodeId(2), value: 4.0, recv_round: 3 });
        let out = step_round(&s, &[], 4, &params(4, 1, 4)).unwrap();
        assert_eq!(out.state.value, 5.0);
        assert!(out.state.log.is_empty());
        assert_eq!(out.state.last_local_start, 5);
    }

    #[test]
    fn step_keeps_most_recent_value_per_sender() {
        let mut s = NodeState::new(NodeId(0), 5.0).unwrap();
        s.log.insert(LogEntry { sender: NodeId(2), value: 4.0, recv_round: 1 });
        let out = step_round(&s, &[msg(2, 0, 4.5, 2)], 2, &params(4, 1, 4)).unwrap();
        let e = out.state.log.get(NodeId(2)).unwrap();
        assert_eq!((e.value, e.recv_round), (4.5, 2));
        assert_eq!(out.state.log.len(), 1);
    }

    #[test]
    fn step_rejects_own_message_and_duplicates() {
        let s = NodeState::new(NodeId(0), 5.0).unwrap();
        let p = params(4, 1, 4);
        assert!(matches!(step_round(&s, &[msg(0, 0, 1.0, 1)], 1, &p), Err(ProtocolError::SelfMessage { .. })));
        assert!(matches!(
            step_round(&s, &[msg(1, 0, 1.0, 1), msg(1, 0, 2.0, 1)], 1, &p),
            Err(ProtocolError::DuplicateSender { .. })
        ));
        assert!(matches!(step_round(&s, &[msg(1, 0, 1.0, 2)], 1, &p), Err(ProtocolError::RoundMismatch { .. })));
        assert!(matches!(step_round(&s, &[msg(9, 0, 1.0, 1)], 1, &p), Err(ProtocolError::UnknownSender { .. })));
    }

    #[test]
    fn step_discards_non_finite_payloads() {
        let s = NodeState::new(NodeId(0), 5.0).unwrap();
        let inbox = [msg(1, 0, f64::NAN, 1), msg(2, 0, f64::INFINITY, 1), msg(3, 0, 6.0, 1)];
        let out = step_round(&s, &inbox, 1, &params(4, 1, 4)).unwrap();
        assert_eq!(out.discarded, 2);
        assert_eq!(out.merged.len(), 1);
        assert!(out.state.value.is_finite());
    }

    #[test]
    fn common_new_start_rounds() {
        assert!(is_common_new_start(1, 4));
        assert!(is_common_new_start(5, 4));
        assert!(!is_common_new_start(6, 4));
        assert!(is_common_new_start(7, 1));
    }

    #[test]
    fn log_rejects_duplicate_senders_on_decode() {
        let json = r#"[{"sender":1,"value":1.0,"recv_round":1},{"sender":1,"value":2.0,"recv_round":1}]"#;
        assert!(serde_json::from_str::<ValueLog>(json).is_err());
    }
}
