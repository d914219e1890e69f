//! Convergence detection at common new starting rounds and the per-phase
//! progress of the extremes.

use serde::{Deserialize, Serialize};

use super::condition::{condition_in_phase, phase_count, Properness};
use super::groups::{Group, PhaseBounds};
use super::{phase_start, AnalysisError};
use crate::protocol::{is_common_new_start, Round};
use crate::trace::Trace;

/// Group-based convergence test on one vector of correct values: all values
/// equal, or some value lies in both near-extreme intervals.
///
/// This implies `spread < epsilon` but not conversely: `{0, 0.05}` with
/// `epsilon = 0.1` has no node strictly inside the range.
pub fn group_criterion(values: &[f64], epsilon: f64, delta: f64) -> Result<bool, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::NoCorrectNodes);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b = PhaseBounds::new(0, 1, lo, hi, delta, epsilon)?;
    Ok(b.collapsed() || values.iter().any(|&v| b.in_interval(Group::Nin, v) && b.in_interval(Group::Nax, v)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartCheck {
    pub round: Round,
    pub spread: f64,
    /// `spread < epsilon`.
    pub converged: bool,
    /// [`group_criterion`] holds.
    pub group_test: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reached: bool,
    /// First common new starting round with `spread < epsilon`.
    pub at_round: Option<Round>,
    pub checks: Vec<StartCheck>,
    /// Both detectors gave the same answer at every checked round.
    pub detectors_agree: bool,
    /// The spread stayed below epsilon in every round after `at_round`.
    pub stable: bool,
}

/// Tests every common new starting round in `1..=R+1`.
pub fn check_convergence(trace: &Trace, epsilon: f64, delta: f64) -> Result<ConvergenceReport, AnalysisError> {
    let t = trace.value_table();
    if t.correct.is_empty() {
        return Err(AnalysisError::NoCorrectNodes);
    }
    let rc = trace.params().rc;
    let checks = (1..=t.last())
        .filter(|&r| is_common_new_start(r, rc))
        .map(|r| {
            let spread = t.spread(r);
            Ok(StartCheck {
                round: r,
                spread,
                converged: spread < epsilon,
                group_test: group_criterion(t.row(r), epsilon, delta)?,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let at_round = checks.iter().find(|c| c.converged).map(|c| c.round);
    let stable = at_round.is_none_or(|r0| (r0..=t.last()).all(|r| t.spread(r) < epsilon));
    Ok(ConvergenceReport {
        reached: at_round.is_some(),
        at_round,
        detectors_agree: checks.iter().all(|c| c.converged == c.group_test),
        checks,
        stable,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProgressViolation {
    /// Both extremes unchanged over the phase, yet the number of correct
    /// nodes holding them did not drop.
    NoDecrease { phase: u64, before: usize, after: usize },
    /// Extremes unchanged for `streak` consecutive condition-satisfying
    /// phases, with `streak >= n`.
    StreakTooLong { phase: u64, streak: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    /// Non-converged, condition-satisfying phases whose successor start was
    /// recorded.
    pub phases_examined: u64,
    /// Examined phases where both extremes stayed put.
    pub stagnant_phases: u64,
    pub longest_streak: u64,
    pub violations: Vec<ProgressViolation>,
}

impl ProgressReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Over every examined phase `k` (condition satisfied, spread at least
/// epsilon at its start), if `vmin` and `vmax` are the same at the starts of
/// phases `k` and `k + 1`, the count of correct nodes at either extreme must
/// strictly drop. Runs of such phases must stay shorter than `n`.
pub fn check_phase_progress(
    trace: &Trace,
    delta: f64,
    properness: Properness,
) -> Result<ProgressReport, AnalysisError> {
    let t = trace.value_table();
    let params = trace.params();
    let extreme_count = |r: Round| {
        let (lo, hi) = (t.vmin(r), t.vmax(r));
        t.row(r).iter().filter(|&&v| v == lo || v == hi).count()
    };
    let mut report =
        ProgressReport { phases_examined: 0, stagnant_phases: 0, longest_streak: 0, violations: Vec::new() };
    let mut streak = 0u64;
    for k in 0..phase_count(trace) {
        let (s, next) = (phase_start(k, params.rc), phase_start(k + 1, params.rc));
        if next > t.last()
            || t.spread(s) < params.epsilon
            || !condition_in_phase(trace, &t, k, delta, properness)?.satisfied
        {
            streak = 0;
            continue;
        }
        report.phases_examined += 1;
        if t.vmin(s) != t.vmin(next) || t.vmax(s) != t.vmax(next) {
            streak = 0;
            continue;
        }
        report.stagnant_phases += 1;
        streak += 1;
        report.longest_streak = report.longest_streak.max(streak);
        let (before, after) = (extreme_count(s), extreme_count(next));
        if after >= before {
            report.violations.push(ProgressViolation::NoDecrease { phase: k, before, after });
        }
        if streak >= params.n as u64 {
            report.violations.push(ProgressViolation::StreakTooLong { phase: k, streak });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ProtocolParams;

    fn trace(rc: u64, epsilon: f64, rows: Vec<Vec<f64>>) -> Trace {
        let n = rows[0].len();
        Trace::from_value_rows(ProtocolParams { n, f: 0, rc, epsilon }, epsilon / 2.0, rows)
    }

    #[test]
    fn equal_values_converge_at_round_one() {
        let r = check_convergence(&trace(3, 0.1, vec![vec![4.0; 3]; 4]), 0.1, 0.05).unwrap();
        assert_eq!(r.at_round, Some(1));
        assert!(r.detectors_agree && r.stable);
    }

    #[test]
    fn half_epsilon_gap_converges_but_group_criterion_disagrees() {
        let r = check_convergence(&trace(1, 0.1, vec![vec![0.0, 0.05]; 2]), 0.1, 0.05).unwrap();
        assert_eq!(r.at_round, Some(1));
        assert!(!r.detectors_agree);
        assert!(!group_criterion(&[0.0, 0.05], 0.1, 0.05).unwrap());
        assert!(group_criterion(&[0.0, 0.03, 0.05], 0.1, 0.05).unwrap());
    }

    #[test]
    fn mid_phase_dip_is_not_convergence() {
        let rows = vec![vec![0.0, 1.0], vec![0.5, 0.55], vec![0.2, 0.8], vec![0.3, 0.7], vec![0.4, 0.45]];
        let r = check_convergence(&trace(2, 0.1, rows), 0.1, 0.05).unwrap();
        assert_eq!(r.at_round, Some(5));
        let rounds: Vec<Round> = r.checks.iter().map(|c| c.round).collect();
        assert_eq!(rounds, vec![1, 3, 5]);
    }

    #[test]
    fn instability_is_reported() {
        let rows = vec![vec![0.0, 0.05], vec![0.0, 0.5], vec![0.0, 0.01]];
        let r = check_convergence(&trace(1, 0.1, rows), 0.1, 0.05).unwrap();
        assert!(r.reached && !r.stable);
    }

    #[test]
    fn single_node_progress_is_vacuous() {
        let report = check_phase_progress(&trace(1, 0.1, vec![vec![1.0]; 5]), 0.05, Properness::Retained).unwrap();
        assert!(report.ok());
        assert_eq!(report.phases_examined, 0);
    }
}
