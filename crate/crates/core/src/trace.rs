//! Execution record of one run and its line-delimited JSON encoding.
//!
//! A trace file holds one JSON object per line:
//!
//! 1. a `header` record (scenario, seed, parameters, Byzantine set);
//! 2. one `round` record per round, in order from round 1;
//! 3. a `final` record with the correct values after the last round.
//!
//! Node values in a round record are the values at the *start* of that
//! round; the final record therefore supplies the start of round `R + 1`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Arena, Position, ValueMessage};
use crate::protocol::{NodeId, ProtocolParams, Round, ValueLog};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("malformed trace: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub params: ProtocolParams,
    pub delta: f64,
    pub radius: f64,
    pub loss_rate: f64,
    pub arena: Arena,
    pub byzantine: Vec<NodeId>,
}

/// Protocol-side record of one correct node in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    /// Value at the start of the round.
    pub value: f64,
    /// Latest local new starting round at the start of the round.
    pub last_local_start: Round,
    /// Log after merging this round's deliveries, before reducing.
    pub log: ValueLog,
    pub updated: bool,
    pub reset: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub discarded: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: Round,
    /// Positions of all `n` nodes after the mobility part.
    pub positions: Vec<Position>,
    pub edges: Vec<(NodeId, NodeId)>,
    /// Every message that reached its receiver, ordered by (sender, receiver).
    pub deliveries: Vec<ValueMessage>,
    /// Number of messages dropped by the channel.
    pub lost: usize,
    /// Everything the Byzantine nodes transmitted, delivered or not.
    pub byzantine_sent: Vec<ValueMessage>,
    /// Correct nodes, ordered by id.
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeValue {
    pub id: NodeId,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub round: Round,
    pub values: Vec<NodeValue>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub rounds: Vec<RoundRecord>,
    pub finish: FinalRecord,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a TraceHeader),
    Round(&'a RoundRecord),
    Final(&'a FinalRecord),
}

#[derive(Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Round(RoundRecord),
    Final(FinalRecord),
}

impl Trace {
    /// Number of simulated rounds `R`.
    pub fn last_round(&self) -> Round {
        self.rounds.len() as Round
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.header.params
    }

    pub fn is_byzantine(&self, id: NodeId) -> bool {
        self.header.byzantine.contains(&id)
    }

    pub fn correct_ids(&self) -> Vec<NodeId> {
        self.finish.values.iter().map(|v| v.id).collect()
    }

    pub fn round(&self, r: Round) -> Option<&RoundRecord> {
        r.checked_sub(1).and_then(|i| self.rounds.get(i as usize))
    }

    pub fn node_record(&self, id: NodeId, r: Round) -> Option<&NodeRecord> {
        let rec = self.round(r)?;
        rec.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &rec.nodes[i])
    }

    /// Value of a correct node at the start of round `r`, for
    /// `1 <= r <= R + 1`.
    pub fn value(&self, id: NodeId, r: Round) -> Option<f64> {
        if r == self.finish.round {
            return self.finish.values.iter().find(|v| v.id == id).map(|v| v.value);
        }
        self.node_record(id, r).map(|n| n.value)
    }

    /// A value-only trace: `rows[r - 1]` holds the start-of-round values of
    /// correct nodes `0..m`, the last row being the final values. Positions,
    /// edges and deliveries are empty. Handy for exercising the checkers on
    /// hand-built executions.
    pub fn from_value_rows(params: ProtocolParams, delta: f64, rows: Vec<Vec<f64>>) -> Trace {
        assert!(!rows.is_empty(), "need at least the final row");
        let m = rows[0].len();
        let header = TraceHeader {
            schema: TRACE_SCHEMA_VERSION,
            scenario: "synthetic".into(),
            seed: 0,
            params,
            delta,
            radius: 0.0,
            loss_rate: 0.0,
            arena: Arena { width: 0.0, height: 0.0 },
            byzantine: Vec::new(),
        };
        let last = rows.len() - 1;
        let rounds = rows[..last]
            .iter()
            .enumerate()
            .map(|(i, row)| RoundRecord {
                round: i as Round + 1,
                positions: Vec::new(),
                edges: Vec::new(),
                deliveries: Vec::new(),
                lost: 0,
                byzantine_sent: Vec::new(),
                nodes: row
                    .iter()
                    .enumerate()
                    .map(|(j, &value)| NodeRecord {
                        id: NodeId(j as u32),
                        value,
                        last_local_start: i as Round + 1,
                        log: ValueLog::new(),
                        updated: false,
                        reset: true,
                        discarded: 0,
                    })
                    .collect(),
            })
            .collect();
        let finish = FinalRecord {
            round: last as Round + 1,
            values: (0..m).map(|j| NodeValue { id: NodeId(j as u32), value: rows[last][j] }).collect(),
        };
        Trace { header, rounds, finish }
    }

    pub fn value_table(&self) -> ValueTable {
        let correct = self.correct_ids();
        let mut rows: Vec<Vec<f64>> =
            self.rounds.iter().map(|rec| rec.nodes.iter().map(|n| n.value).collect()).collect();
        rows.push(self.finish.values.iter().map(|v| v.value).collect());
        ValueTable { correct, rows }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let mut put = |line: LineRef| -> Result<(), TraceError> {
            serde_json::to_writer(&mut w, &line).map_err(|e| TraceError::Io(e.into()))?;
            w.write_all(b"\n")?;
            Ok(())
        };
        put(LineRef::Header(&self.header))?;
        for r in &self.rounds {
            put(LineRef::Round(r))?;
        }
        put(LineRef::Final(&self.finish))
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut rounds = Vec::new();
        let mut finish = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match parsed {
                Line::Header(h) if header.is_none() && rounds.is_empty() => header = Some(h),
                Line::Round(rec) if header.is_some() && finish.is_none() => {
                    let expected = rounds.len() as Round + 1;
                    if rec.round != expected {
                        return Err(TraceError::Malformed(format!(
                            "line {}: round {} where round {expected} was expected",
                            i + 1,
                            rec.round
                        )));
                    }
                    rounds.push(rec);
                }
                Line::Final(fin) if header.is_some() && finish.is_none() => finish = Some(fin),
                _ => {
                    return Err(TraceError::Malformed(format!("line {}: record out of order", i + 1)));
                }
            }
        }
        let header = header.ok_or_else(|| TraceError::Malformed("missing header".into()))?;
        let finish = finish.ok_or_else(|| TraceError::Malformed("missing final record".into()))?;
        if header.schema != TRACE_SCHEMA_VERSION {
            return Err(TraceError::Malformed(format!("unsupported schema version {}", header.schema)));
        }
        if finish.round != rounds.len() as Round + 1 {
            return Err(TraceError::Malformed("final record does not follow the last round".into()));
        }
        Ok(Trace { header, rounds, finish })
    }
}

/// Correct values by round, rows `1..=R+1`, columns in correct-id order.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub correct: Vec<NodeId>,
    rows: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn from_rows(correct: Vec<NodeId>, rows: Vec<Vec<f64>>) -> Self {
        ValueTable { correct, rows }
    }

    /// Last round whose start values are known (`R + 1`).
    pub fn last(&self) -> Round {
        self.rows.len() as Round
    }

    pub fn row(&self, r: Round) -> &[f64] {
        &self.rows[(r - 1) as usize]
    }

    pub fn vmin(&self, r: Round) -> f64 {
        self.row(r).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn vmax(&self, r: Round) -> f64 {
        self.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spread(&self, r: Round) -> f64 {
        self.vmax(r) - self.vmin(r)
    }
}
