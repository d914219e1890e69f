//! One lock-step execution of a scenario.

use crate::adversary::{byzantine_outbox, AdversaryView};
use crate::dynamics::{build_round_graph, deliver, Mobility, ValueMessage};
use crate::protocol::vectors::StepVector;
use crate::protocol::{is_common_new_start, step_round, NodeState};
use crate::rng::StreamSeed;
use crate::trace::{FinalRecord, NodeRecord, NodeValue, RoundRecord, Trace, TraceHeader, TRACE_SCHEMA_VERSION};

use super::report::{build_report, RunReport};
use super::{HarnessError, ScenarioConfig};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Record every `step_round` call as a conformance vector.
    pub record_vectors: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: RunReport,
    pub vectors: Vec<StepVector>,
}

/// Simulates `config` and analyzes the resulting trace.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    run_scenario_with(config, &RunOptions::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, options: &RunOptions) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let (trace, vectors) = simulate(config, options)?;
    let report = build_report(&config.expect, &trace)?;
    Ok(RunOutput { trace, report, vectors })
}

/// The simulation alone: mobility, graph, broadcast, delivery and the
/// protocol step of every correct node, for `max_rounds` rounds.
pub fn simulate(config: &ScenarioConfig, options: &RunOptions) -> Result<(Trace, Vec<StepVector>), HarnessError> {
    let params = config.params();
    let seed = StreamSeed(config.seed);
    let strategy = config.strategy();
    let n = config.n;

    let mut positions = config.initial_positions(&seed);
    let mut mobility = Mobility::new(config.mobility.clone(), config.network.arena(), n);
    let mut states: Vec<Option<NodeState>> = vec![None; n];
    for (id, v) in config.correct_ids().into_iter().zip(config.initial_values(&seed)) {
        states[id.index()] = Some(NodeState::new(id, v)?);
    }
    let mut phase_start: Vec<Option<f64>> = Vec::new();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut vectors = Vec::new();

    for r in 1..=config.max_rounds() {
        positions = mobility.move_step(&positions, r, &seed);
        let graph = build_round_graph(&positions, config.network.radius, r);
        let current: Vec<Option<f64>> = states.iter().map(|s| s.as_ref().map(|s| s.value)).collect();
        if is_common_new_start(r, params.rc) {
            phase_start = current.clone();
        }

        let mut outbox: Vec<ValueMessage> = Vec::new();
        for s in states.iter().flatten() {
            outbox.extend(graph.out_neighbors(s.id).map(|j| ValueMessage {
                sender: s.id,
                receiver: j,
                value: s.value,
                round: r,
            }));
        }
        let view = AdversaryView { round: r, current: &current, phase_start: &phase_start, history: &rounds, seed };
        let mut byzantine_sent = Vec::new();
        for &b in &strategy.byzantine {
            byzantine_sent.extend(byzantine_outbox(&strategy, b, &graph, &view)?);
        }
        outbox.extend_from_slice(&byzantine_sent);
        let delivery = deliver(&graph, &outbox, config.network.loss_rate, &seed)?;

        let mut nodes = Vec::new();
        for slot in states.iter_mut() {
            let Some(state) = slot.as_mut() else { continue };
            let inbox = &delivery.inboxes[state.id.index()];
            let out = step_round(state, inbox, r, &params)?;
            nodes.push(NodeRecord {
                id: state.id,
                value: state.value,
                last_local_start: state.last_local_start,
                log: out.merged.clone(),
                updated: out.updated(),
                reset: out.reset,
                discarded: out.discarded,
            });
            if options.record_vectors {
                vectors.push(StepVector::from_outcome(params, r, state.clone(), inbox.clone(), &out));
            }
            *state = out.state;
        }

        let mut deliveries: Vec<ValueMessage> = delivery.delivered().copied().collect();
        deliveries.sort_by_key(|m| (m.sender, m.receiver));
        rounds.push(RoundRecord {
            round: r,
            positions: positions.clone(),
            edges: graph.edges.iter().copied().collect(),
            deliveries,
            lost: delivery.lost.len(),
            byzantine_sent,
            nodes,
        });
    }

    let header = TraceHeader {
        schema: TRACE_SCHEMA_VERSION,
        scenario: config.name.clone(),
        seed: config.seed,
        params,
        delta: config.delta(),
        radius: config.network.radius,
        loss_rate: config.network.loss_rate,
        arena: config.network.arena(),
        byzantine: strategy.byzantine.iter().copied().collect(),
    };
    let finish = FinalRecord {
        round: config.max_rounds() + 1,
        values: states.iter().flatten().map(|s| NodeValue { id: s.id, value: s.value }).collect(),
    };
    Ok((Trace { header, rounds, finish }, vectors))
}
