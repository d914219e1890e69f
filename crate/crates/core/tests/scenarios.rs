//! Every bundled scenario reproduces its documented verdict.

use mabc::analysis::{check_condition, classify_groups, validate_witness, Group, Properness};
use mabc::dynamics::joint_neighbor_set;
use mabc::harness::library::{builtin, builtin_names};
use mabc::harness::{run_scenario, run_scenario_with, RunOptions};
use mabc::protocol::vectors::verify_vectors;
use mabc::NodeId;

/// Values at the start of rounds 1..=5, derived by hand from the update
/// rule: each node drops the single value farthest on the crowded side and
/// averages the rest with its own.
fn baseline_golden() -> Vec<[f64; 4]> {
    vec![
        [0.0, 1.0, 2.0, 3.0],
        [1.0, 1.5, 1.5, 2.0],
        [4.0 / 3.0, 1.5, 1.5, 5.0 / 3.0],
        [13.0 / 9.0, 1.5, 1.5, 14.0 / 9.0],
        [40.0 / 27.0, 1.5, 1.5, 41.0 / 27.0],
    ]
}

const GOLDEN_TOL: f64 = 1e-12;

#[test]
fn every_bundled_scenario_meets_its_expectations() {
    for name in builtin_names() {
        let cfg = builtin(name).unwrap();
        let out = run_scenario(&cfg).unwrap();
        for e in &out.report.expectations {
            assert!(e.pass, "{name}: expected {} = {}, got {}", e.name, e.expected, e.actual);
        }
        assert!(out.report.witnesses_valid, "{name}: invalid witness");
    }
}

#[test]
fn baseline_matches_hand_derived_values() {
    let out = run_scenario(&builtin("fully_connected_baseline").unwrap()).unwrap();
    for (i, row) in baseline_golden().iter().enumerate() {
        let r = i as u64 + 1;
        for (j, want) in row.iter().enumerate() {
            let got = out.trace.value(NodeId(j as u32), r).unwrap();
            assert!((got - want).abs() < GOLDEN_TOL, "round {r} node {j}: {got} vs {want}");
        }
    }
    let spreads: Vec<f64> = out.report.convergence.checks.iter().take(5).map(|c| c.spread).collect();
    for (got, want) in spreads.iter().zip([3.0, 1.0, 1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0]) {
        assert!((got - want).abs() < GOLDEN_TOL, "spread {got} vs {want}");
    }
    assert_eq!(out.report.convergence.at_round, Some(5));
    assert!(out.report.convergence.detectors_agree);
    assert!(out.report.validity.ok && out.report.safety.ok && out.report.monotone.as_ref().unwrap().ok);
}

#[test]
fn n_equals_3f_values_freeze_after_the_first_round() {
    let out = run_scenario(&builtin("lemma2_3f_impossible").unwrap()).unwrap();
    let t = &out.trace;
    let round2: Vec<f64> = (0..4).map(|j| t.value(NodeId(j), 2).unwrap()).collect();
    let want = [9.95, 9.95, 0.05, 0.05];
    for (got, want) in round2.iter().zip(want) {
        assert!((got - want).abs() < GOLDEN_TOL);
    }
    for r in 2..=t.finish.round {
        let row: Vec<f64> = (0..4).map(|j| t.value(NodeId(j), r).unwrap()).collect();
        assert_eq!(row, round2, "round {r}");
    }
    assert!(!out.report.cardinality);
    // Only f = 2 proper values reach an extreme holder.
    let rec = t.node_record(NodeId(0), 1).unwrap();
    let proper = rec.log.iter().filter(|e| e.value <= 10.0 - 0.5).count();
    assert_eq!(proper, 2);
}

#[test]
fn necessity_scenarios_show_exactly_f_proper_values() {
    for name in ["necessity_f_proper", "necessity_improper_mix"] {
        let out = run_scenario(&builtin(name).unwrap()).unwrap();
        let t = &out.trace;
        // A1 (node 1) holds the minimum and sees B1's 10 as its only proper value.
        let rec = t.node_record(NodeId(1), 1).unwrap();
        let proper: Vec<NodeId> = rec.log.iter().filter(|e| e.value >= 0.5).map(|e| e.sender).collect();
        assert_eq!(proper, vec![NodeId(2)], "{name}");
        assert!(out.report.values_constant, "{name}");
        assert!(!check_condition(t, 0, 0.5, Properness::Strict).unwrap().satisfied, "{name}");
    }
    let mix = run_scenario(&builtin("necessity_improper_mix").unwrap()).unwrap();
    let rec = mix.trace.node_record(NodeId(1), 1).unwrap();
    assert_eq!(rec.log.get(NodeId(4)).map(|e| e.value), Some(-5.0));
    let groups = classify_groups(&mix.trace, 0, 1, 0.5).unwrap();
    assert_eq!(groups.byzantine[&NodeId(4)].iter().copied().collect::<Vec<_>>(), vec![Group::Min, Group::Max]);
}

#[test]
fn partition_cliques_agree_internally_but_not_globally() {
    let out = run_scenario(&builtin("partition_never").unwrap()).unwrap();
    let fin = &out.trace.finish.values;
    let (a, b): (Vec<f64>, Vec<f64>) =
        (fin[..4].iter().map(|v| v.value).collect(), fin[4..].iter().map(|v| v.value).collect());
    let spread = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    assert!(spread(&a) < 1.0 && spread(&b) < 1.0);
    let gap = b.iter().copied().fold(f64::INFINITY, f64::min) - a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(gap >= 1.0);
    assert!(!out.report.convergence.reached);
    // No edge ever crosses between the cliques.
    for rec in &out.trace.rounds {
        assert!(rec.edges.iter().all(|(s, r)| (s.0 < 4 || s.0 == 8) == (r.0 < 4 || r.0 == 8)));
    }
}

#[test]
fn scripted_mover_gathers_across_rounds() {
    let out = run_scenario(&builtin("fig1_scripted_path").unwrap()).unwrap();
    let t = &out.trace;
    let p = NodeId(0);
    let updates: Vec<u64> = (1..=t.last_round()).filter(|&r| t.node_record(p, r).unwrap().updated).collect();
    assert_eq!(updates, vec![3]);
    assert_eq!(t.value(p, 4), Some(3.0));
    let jn = |r| joint_neighbor_set(t, p, r).unwrap().into_iter().collect::<Vec<_>>();
    assert_eq!(jn(2), vec![NodeId(1)]);
    assert_eq!(jn(3), vec![NodeId(1), NodeId(2)]);
    assert!(jn(4).is_empty());
    let pos = |r: u64| t.round(r).unwrap().positions[0];
    assert_eq!(
        [pos(1), pos(2), pos(3), pos(4), pos(8)].map(|q| (q.x, q.y)),
        [(3.0, 5.0), (3.0, 5.0), (7.0, 5.0), (5.0, 9.0), (5.0, 9.0)]
    );
    let v = check_condition(t, 0, 0.05, Properness::Retained).unwrap();
    assert!(v.satisfied);
    validate_witness(t, 0, 0.05, v.witness.as_ref().unwrap()).unwrap();
    // The witness needs values gathered in two different rounds.
    assert!(!check_condition(t, 0, 0.05, Properness::Strict).unwrap().satisfied);
}

#[test]
fn over_budget_control_breaks_validity() {
    let out = run_scenario(&builtin("over_budget_control").unwrap()).unwrap();
    assert!(!out.report.validity.ok && !out.report.legality.ok);
    assert!(!out.report.passed);
    let w = out.report.validity.first_violation.unwrap();
    assert_eq!(w.round, 2);
}

#[test]
fn recorded_step_vectors_replay() {
    for name in ["fig1_scripted_path", "necessity_improper_mix", "fully_connected_baseline"] {
        let out = run_scenario_with(&builtin(name).unwrap(), &RunOptions { record_vectors: true }).unwrap();
        assert!(!out.vectors.is_empty());
        assert!(verify_vectors(&out.vectors).is_empty(), "{name}");
    }
}

#[test]
fn single_cell_sweep_matches_direct_runs() {
    use mabc::harness::sweep::apply_cell;
    use mabc::harness::{sweep, GridConfig};

    let template = builtin("random_mobile").unwrap();
    let grid = GridConfig::from_toml("schema_version = 1\n[grid]\nrc = [3]\n").unwrap();
    let report = sweep(&template, &grid, 4).unwrap();
    assert_eq!(report.cells.len(), 1);
    let cell = &report.cells[0];
    assert_eq!(report.seeds, vec![template.seed, template.seed + 1, template.seed + 2, template.seed + 3]);

    let mut rounds = Vec::new();
    let mut all_phases = 0;
    for &seed in &report.seeds {
        let mut cfg = apply_cell(&template, &[("rc".to_string(), 3.0)]).unwrap();
        assert_eq!(cfg.rc, 3);
        cfg.seed = seed;
        let out = run_scenario(&cfg).unwrap();
        rounds.extend(out.report.convergence.at_round);
        all_phases += usize::from(out.report.condition.satisfied);
    }
    assert_eq!(cell.runs, 4);
    assert!(cell.errors.is_empty());
    assert_eq!(cell.converged, rounds.len());
    let mean = (!rounds.is_empty()).then(|| rounds.iter().sum::<u64>() as f64 / rounds.len() as f64);
    assert_eq!(cell.mean_convergence_round, mean);
    assert_eq!(cell.condition_all_rate, all_phases as f64 / 4.0);
}
