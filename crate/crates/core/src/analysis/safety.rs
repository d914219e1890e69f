//! Range properties of correct values: validity, legality, phase safety and
//! the per-round monotone envelopes.

use serde::{Deserialize, Serialize};

use crate::protocol::{is_common_new_start, NodeId, Round};
use crate::trace::{Trace, ValueTable};

/// Reference round `d` whose correct range must contain any correct value
/// of round `r`, writing `r = k*rc + m` with `1 <= m <= rc`.
pub fn legal_reference_round(r: Round, rc: u64) -> Round {
    assert!(r >= 1 && rc >= 1, "rounds and rc start at 1");
    let k = (r - 1) / rc;
    let m = r - k * rc;
    match (k, m) {
        (0, 1) => 1,
        (k, 1) => (k - 1) * rc + 1,
        (k, _) => k * rc + 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueViolation {
    pub node: NodeId,
    pub round: Round,
    pub value: f64,
    /// Round whose correct range was violated.
    pub reference_round: Round,
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub first_violation: Option<ValueViolation>,
}

impl Verdict {
    fn from_first(first: Option<ValueViolation>) -> Self {
        Verdict { ok: first.is_none(), first_violation: first }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalityReport {
    /// Number of (node, round) pairs examined.
    pub checked: usize,
    pub violations: Vec<ValueViolation>,
}

impl LegalityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_legal(&self, node: NodeId, round: Round) -> bool {
        !self.violations.iter().any(|v| v.node == node && v.round == round)
    }
}

fn first_outside(table: &ValueTable, r: Round, low: f64, high: f64, reference: Round) -> Option<ValueViolation> {
    table.correct.iter().zip(table.row(r)).find(|(_, &v)| v < low || v > high).map(|(&node, &value)| ValueViolation {
        node,
        round: r,
        value,
        reference_round: reference,
        low,
        high,
    })
}

/// Every correct value of every round lies in the range of the correct
/// initial values.
pub fn check_validity(trace: &Trace) -> Verdict {
    let t = trace.value_table();
    let (low, high) = (t.vmin(1), t.vmax(1));
    Verdict::from_first((1..=t.last()).find_map(|r| first_outside(&t, r, low, high, 1)))
}

/// Every correct value of round `r` lies in the correct range of
/// `legal_reference_round(r)`.
pub fn check_legality(trace: &Trace) -> LegalityReport {
    let t = trace.value_table();
    let rc = trace.params().rc;
    let mut violations = Vec::new();
    let mut checked = 0;
    for r in 1..=t.last() {
        let d = legal_reference_round(r, rc);
        let (low, high) = (t.vmin(d), t.vmax(d));
        for (&node, &value) in t.correct.iter().zip(t.row(r)) {
            checked += 1;
            if value < low || value > high {
                violations.push(ValueViolation { node, round: r, value, reference_round: d, low, high });
            }
        }
    }
    LegalityReport { checked, violations }
}

/// From every common new starting round `s` on, correct values never leave
/// the correct range of round `s`.
pub fn check_safety(trace: &Trace) -> Verdict {
    let t = trace.value_table();
    let rc = trace.params().rc;
    let last = t.last();
    // Suffix envelopes: extremes over all rounds >= r.
    let mut suffix_min = vec![f64::INFINITY; last as usize + 2];
    let mut suffix_max = vec![f64::NEG_INFINITY; last as usize + 2];
    for r in (1..=last).rev() {
        suffix_min[r as usize] = suffix_min[r as usize + 1].min(t.vmin(r));
        suffix_max[r as usize] = suffix_max[r as usize + 1].max(t.vmax(r));
    }
    for s in (1..=last).filter(|&s| is_common_new_start(s, rc)) {
        let (low, high) = (t.vmin(s), t.vmax(s));
        if suffix_min[s as usize] < low || suffix_max[s as usize] > high {
            let first = (s..=last).find_map(|r| first_outside(&t, r, low, high, s));
            return Verdict::from_first(first);
        }
    }
    Verdict::from_first(None)
}

/// `vmax` never increases and `vmin` never decreases from one round to the
/// next. Only guaranteed by the protocol when `rc = 1`.
pub fn check_monotone_envelopes(trace: &Trace) -> Verdict {
    let t = trace.value_table();
    let first = (2..=t.last()).find_map(|r| first_outside(&t, r, t.vmin(r - 1), t.vmax(r - 1), r - 1));
    Verdict::from_first(first)
}
