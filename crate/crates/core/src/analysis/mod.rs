//! Offline checkers over [`Trace`](crate::trace::Trace)s.
//!
//! Nothing here reads simulator internals: every verdict is derived from
//! the recorded values, logs and deliveries alone.

use thiserror::Error;

use crate::protocol::Round;

mod condition;
mod convergence;
mod groups;
mod safety;
mod series;

pub use condition::{
    check_condition, check_condition_all, phase_count, validate_witness, ConditionMode, ConditionSummary,
    ConditionVerdict, Properness, Witness, WitnessError,
};
pub use convergence::{
    check_convergence, check_phase_progress, group_criterion, ConvergenceReport, ProgressReport, ProgressViolation,
    StartCheck,
};
pub use groups::{classify_groups, is_proper, ExtremeGroup, Group, GroupClassification, PhaseBounds};
pub use safety::{
    check_legality, check_monotone_envelopes, check_safety, check_validity, legal_reference_round, LegalityReport,
    ValueViolation, Verdict,
};
pub use series::{series, write_series_csv, SeriesRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("delta {delta} outside (0, epsilon/2] with epsilon = {epsilon}")]
    DeltaOutOfRange { delta: f64, epsilon: f64 },
    #[error("phase {phase} starts at round {start}, beyond the last recorded round {last}")]
    PhaseBeyondTrace { phase: u64, start: Round, last: Round },
    #[error("round {round} is not part of phase {phase} (rounds {first}..={last_round})")]
    RoundOutsidePhase { round: Round, phase: u64, first: Round, last_round: Round },
    #[error("trace has no correct node")]
    NoCorrectNodes,
}

/// `n >= 3f + 1`.
pub fn check_cardinality(n: usize, f: usize) -> bool {
    n > 3 * f
}

/// First round of phase `k`.
pub fn phase_start(k: u64, rc: u64) -> Round {
    k * rc + 1
}

/// Phase containing round `r`.
pub fn phase_of(r: Round, rc: u64) -> u64 {
    (r - 1) / rc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_examples() {
        assert!(check_cardinality(4, 1));
        assert!(!check_cardinality(3, 1));
        assert!(check_cardinality(7, 2));
        assert!(check_cardinality(1, 0));
        assert!(!check_cardinality(6, 2));
    }

    #[test]
    fn phase_arithmetic() {
        assert_eq!(phase_start(0, 4), 1);
        assert_eq!(phase_start(2, 4), 9);
        assert_eq!(phase_of(1, 4), 0);
        assert_eq!(phase_of(4, 4), 0);
        assert_eq!(phase_of(5, 4), 1);
    }
}
