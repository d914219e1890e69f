//! Conformance vectors for [`step_round`](super::step_round).
//!
//! A vector file is JSON lines, one record per call: the inputs (parameters,
//! round, prior state, inbox) and the expected outputs (next state,
//! broadcast value, whether the value was recomputed). Other
//! implementations of the node state machine can replay the file and
//! compare.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{step_round, NodeState, ProtocolParams, Round, StepOutcome};
use crate::dynamics::ValueMessage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepVector {
    pub params: ProtocolParams,
    pub round: Round,
    pub state: NodeState,
    pub inbox: Vec<ValueMessage>,
    pub expected: ExpectedStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStep {
    pub state: NodeState,
    pub broadcast: f64,
    pub updated: bool,
}

impl StepVector {
    pub fn from_outcome(
        params: ProtocolParams,
        round: Round,
        state: NodeState,
        inbox: Vec<ValueMessage>,
        out: &StepOutcome,
    ) -> Self {
        StepVector {
            params,
            round,
            state,
            inbox,
            expected: ExpectedStep { state: out.state.clone(), broadcast: out.broadcast, updated: out.updated() },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VectorError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

pub fn write_vectors<W: Write>(mut w: W, vectors: &[StepVector]) -> Result<(), VectorError> {
    for v in vectors {
        serde_json::to_writer(&mut w, v).map_err(|e| VectorError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_vectors<R: BufRead>(r: R) -> Result<Vec<StepVector>, VectorError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| VectorError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

/// Replays every vector and returns the indices whose outputs differ
/// (bitwise on values) from the recorded expectation.
pub fn verify_vectors(vectors: &[StepVector]) -> Vec<usize> {
    vectors
        .iter()
        .enumerate()
        .filter(|(_, v)| match step_round(&v.state, &v.inbox, v.round, &v.params) {
            Ok(out) => {
                out.broadcast.to_bits() != v.expected.broadcast.to_bits()
                    || out.state.value.to_bits() != v.expected.state.value.to_bits()
                    || out.state != v.expected.state
                    || out.updated() != v.expected.updated
            }
            Err(_) => true,
        })
        .map(|(i, _)| i)
        .collect()
}
