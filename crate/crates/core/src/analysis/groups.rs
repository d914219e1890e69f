//! Value intervals frozen at a phase start, the five node groups and
//! properness.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{phase_start, AnalysisError};
use crate::protocol::{NodeId, Round};
use crate::trace::{Trace, ValueTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Min,
    Nin,
    Mid,
    Nax,
    Max,
}

/// The two groups the convergence condition is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeGroup {
    Min,
    Max,
}

/// Correct extremes at the start of phase `phase`, with the interval width
/// `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBounds {
    pub phase: u64,
    pub start_round: Round,
    pub vmin: f64,
    pub vmax: f64,
    pub delta: f64,
}

impl PhaseBounds {
    pub fn new(
        phase: u64,
        start_round: Round,
        vmin: f64,
        vmax: f64,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self, AnalysisError> {
        if !(delta > 0.0 && delta <= epsilon / 2.0) {
            return Err(AnalysisError::DeltaOutOfRange { delta, epsilon });
        }
        assert!(vmin <= vmax, "phase bounds out of order: {vmin} > {vmax}");
        Ok(PhaseBounds { phase, start_round, vmin, vmax, delta })
    }

    pub(crate) fn from_table(
        table: &ValueTable,
        phase: u64,
        rc: u64,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self, AnalysisError> {
        let start = phase_start(phase, rc);
        if start > table.last() {
            return Err(AnalysisError::PhaseBeyondTrace { phase, start, last: table.last() });
        }
        if table.correct.is_empty() {
            return Err(AnalysisError::NoCorrectNodes);
        }
        PhaseBounds::new(phase, start, table.vmin(start), table.vmax(start), delta, epsilon)
    }

    /// All correct values coincided at the phase start.
    pub fn collapsed(&self) -> bool {
        self.vmin == self.vmax
    }

    pub fn spread(&self) -> f64 {
        self.vmax - self.vmin
    }

    /// Group tag of a value.
    ///
    /// `Min` and `Max` cover everything at or beyond the extremes, which is
    /// what Byzantine values need; correct values never fall strictly
    /// outside. On a collapsed range every value is tagged `Min` (and the
    /// `Min` and `Max` groups coincide). When the range is narrower than
    /// `2 * delta` the two near intervals overlap; a value in the overlap is
    /// tagged `Nin`, see [`PhaseBounds::in_interval`] for exact membership.
    pub fn classify(&self, v: f64) -> Group {
        if self.collapsed() || v <= self.vmin {
            Group::Min
        } else if v >= self.vmax {
            Group::Max
        } else if v < self.vmin + self.delta {
            Group::Nin
        } else if v > self.vmax - self.delta {
            Group::Nax
        } else {
            Group::Mid
        }
    }

    /// Membership in the correct-node interval of `group`.
    pub fn in_interval(&self, group: Group, v: f64) -> bool {
        let (lo, hi, d) = (self.vmin, self.vmax, self.delta);
        match group {
            Group::Min => v == lo,
            Group::Max => v == hi,
            Group::Nin => lo < v && v < lo + d,
            Group::Nax => hi - d < v && v < hi,
            Group::Mid => lo + d <= v && v <= hi - d,
        }
    }
}

/// Properness from the viewpoint of a node that held an extreme at the
/// phase start. A proper value may well be a fake one.
pub fn is_proper(value: f64, observer: ExtremeGroup, bounds: &PhaseBounds) -> bool {
    match observer {
        ExtremeGroup::Min => value >= bounds.vmin + bounds.delta,
        ExtremeGroup::Max => value <= bounds.vmax - bounds.delta,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupClassification {
    pub round: Round,
    pub bounds: PhaseBounds,
    pub collapsed: bool,
    /// Exactly one tag per correct node.
    pub correct: BTreeMap<NodeId, Group>,
    /// Every tag earned by a value the Byzantine node sent this round.
    pub byzantine: BTreeMap<NodeId, BTreeSet<Group>>,
}

impl GroupClassification {
    pub fn count(&self, group: Group) -> usize {
        self.correct.values().filter(|&&g| g == group).count()
    }

    pub fn members(&self, group: Group) -> BTreeSet<NodeId> {
        self.correct.iter().filter(|(_, &g)| g == group).map(|(&id, _)| id).collect()
    }
}

/// Groups of round `r` (which must belong to phase `phase`) against the
/// intervals frozen at the phase start.
pub fn classify_groups(trace: &Trace, phase: u64, r: Round, delta: f64) -> Result<GroupClassification, AnalysisError> {
    let params = trace.params();
    let table = trace.value_table();
    let bounds = PhaseBounds::from_table(&table, phase, params.rc, delta, params.epsilon)?;
    let first = bounds.start_round;
    let last_round = first + params.rc - 1;
    if r < first || r > last_round || r > table.last() {
        return Err(AnalysisError::RoundOutsidePhase { round: r, phase, first, last_round });
    }
    let correct = table.correct.iter().zip(table.row(r)).map(|(&id, &v)| (id, bounds.classify(v))).collect();
    let mut byzantine: BTreeMap<NodeId, BTreeSet<Group>> = BTreeMap::new();
    if let Some(rec) = trace.round(r) {
        for m in &rec.byzantine_sent {
            if !m.value.is_nan() {
                byzantine.entry(m.sender).or_default().insert(bounds.classify(m.value));
            }
        }
    }
    Ok(GroupClassification { round: r, bounds, collapsed: bounds.collapsed(), correct, byzantine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ValueMessage;
    use crate::protocol::ProtocolParams;

    fn bounds() -> PhaseBounds {
        PhaseBounds::new(0, 1, 0.0, 10.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn interval_membership_example() {
        let b = bounds();
        let tags: Vec<Group> = [0.0, 0.5, 5.0, 9.5, 10.0].iter().map(|&v| b.classify(v)).collect();
        assert_eq!(tags, vec![Group::Min, Group::Nin, Group::Mid, Group::Nax, Group::Max]);
        assert_eq!(b.classify(1.0), Group::Mid);
        assert_eq!(b.classify(9.0), Group::Mid);
        assert_eq!(b.classify(11.0), Group::Max);
        assert_eq!(b.classify(-3.0), Group::Min);
    }

    #[test]
    fn delta_must_be_in_range() {
        assert!(matches!(PhaseBounds::new(0, 1, 0.0, 1.0, 0.0, 1.0), Err(AnalysisError::DeltaOutOfRange { .. })));
        assert!(PhaseBounds::new(0, 1, 0.0, 1.0, 0.6, 1.0).is_err());
        assert!(PhaseBounds::new(0, 1, 0.0, 1.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn proper_value_examples() {
        let b = bounds();
        assert!(is_proper(1.0, ExtremeGroup::Min, &b));
        assert!(!is_proper(0.5, ExtremeGroup::Min, &b));
        assert!(is_proper(-50.0, ExtremeGroup::Max, &b));
        assert!(!is_proper(9.5, ExtremeGroup::Max, &b));
    }

    #[test]
    fn collapsed_range_tags_everyone_min() {
        let t = Trace::from_value_rows(ProtocolParams { n: 3, f: 0, rc: 2, epsilon: 1.0 }, 0.5, vec![vec![2.0; 3]; 3]);
        let c = classify_groups(&t, 0, 2, 0.5).unwrap();
        assert!(c.collapsed);
        assert_eq!(c.count(Group::Min), 3);
    }

    #[test]
    fn classification_partitions_and_tags_byzantine_values() {
        let params = ProtocolParams { n: 6, f: 1, rc: 2, epsilon: 2.0 };
        let mut t = Trace::from_value_rows(
            params,
            1.0,
            vec![vec![0.0, 0.5, 5.0, 9.5, 10.0], vec![0.0, 0.7, 5.0, 9.0, 10.0], vec![0.3; 5]],
        );
        t.header.byzantine = vec![NodeId(5)];
        let send = |to: u32, value: f64| ValueMessage { sender: NodeId(5), receiver: NodeId(to), value, round: 2 };
        t.rounds[1].byzantine_sent = vec![send(0, 11.0), send(4, -4.0), send(2, 9.7)];
        let c = classify_groups(&t, 0, 2, 1.0).unwrap();
        assert_eq!(c.correct.len(), 5);
        let total: usize =
            [Group::Min, Group::Nin, Group::Mid, Group::Nax, Group::Max].iter().map(|&g| c.count(g)).sum();
        assert_eq!(total, 5);
        assert_eq!(c.correct[&NodeId(3)], Group::Mid);
        let byz: Vec<Group> = c.byzantine[&NodeId(5)].iter().copied().collect();
        assert_eq!(byz, vec![Group::Min, Group::Nax, Group::Max]);
        assert!(classify_groups(&t, 0, 3, 1.0).is_err());
        assert!(classify_groups(&t, 0, 2, 1.5).is_err());
        assert!(matches!(classify_groups(&t, 5, 11, 1.0), Err(AnalysisError::PhaseBeyondTrace { .. })));
    }
}
