use std::collections::{BTreeMap, BTreeSet};

use xchain_core::checker::{
    binding_with, compliance_sets, compute_all_xi, compute_xi, replay, verify, verify_with_jobs, CheckError,
    Property, Protocol, StrategyCatalog, COMPLIANT,
};
use xchain_core::report::render_machine;
use xchain_core::scenario::Scenario;
use xchain_core::scheduler::{for_each_schedule, DeliveryPolicy};
use xchain_core::swap::{build_swap_protocol, build_swap_protocol_with, swap_scenario, SwapParams};
use xchain_core::{ContractStateVector, PartyId};

fn vector(a: &str, b: &str) -> ContractStateVector {
    ContractStateVector::new([a, b])
}

/// Ξ without deduplication or parallelism: every assignment of every
/// deviator's entries, every schedule.
fn brute_force_xi(p: &Protocol, c: &StrategyCatalog, compliance: &BTreeSet<PartyId>) -> BTreeSet<ContractStateVector> {
    let parties: Vec<PartyId> = (0..p.system.parties.len()).map(PartyId).collect();
    let mut assignments: Vec<BTreeMap<PartyId, String>> = vec![BTreeMap::new()];
    for q in &parties {
        let options: Vec<String> = if compliance.contains(q) {
            vec![COMPLIANT.into()]
        } else {
            c.for_party(*q).map(|e| e.name.clone()).collect()
        };
        assignments = assignments
            .into_iter()
            .flat_map(|a| {
                options.iter().map(move |o| {
                    let mut a = a.clone();
                    a.insert(*q, o.clone());
                    a
                })
            })
            .collect();
    }
    let mut out = BTreeSet::new();
    for a in assignments {
        let (binding, horizon) = binding_with(p, c, &a).unwrap();
        for policy in &p.options.policies {
            for_each_schedule(&p.system, &binding, *policy, p.options.exhaustive_order, p.contract_inputs(0), horizon, |_, e| {
                out.insert(e.outcome);
            })
            .unwrap();
        }
    }
    out
}

fn xi(p: &Protocol, c: &StrategyCatalog, q: &[usize]) -> BTreeSet<ContractStateVector> {
    let q: BTreeSet<PartyId> = q.iter().copied().map(PartyId).collect();
    compute_xi(p, c, 0, &q).unwrap().outcome_set(&p.task)
}

#[test]
fn swap_xi_matches_case_tables() {
    let (p, c) = build_swap_protocol();
    assert_eq!(xi(&p, &c, &[0, 1]), [vector("a↪B", "b↪A")].into());
    assert_eq!(xi(&p, &c, &[0]), [vector("a↪A", "b↪B"), vector("a↪A", "b↪A")].into());
    assert_eq!(xi(&p, &c, &[1]), [vector("a↪A", "b↪B"), vector("a↪B", "b↪B")].into());
}

#[test]
fn swap_xi_matches_brute_force_under_every_schedule_space() {
    for (extra, order) in [(false, false), (false, true), (true, false), (true, true)] {
        let (mut p, c) = build_swap_protocol();
        if extra {
            p.options.policies.push(DeliveryPolicy::Exhaustive);
        }
        p.options.exhaustive_order = order;
        for q in compliance_sets(2) {
            let got = compute_xi(&p, &c, 0, &q).unwrap().outcome_set(&p.task);
            assert_eq!(got, brute_force_xi(&p, &c, &q), "{q:?} exhaustive={extra} order={order}");
        }
    }
}

#[test]
fn timing_catalog_matches_brute_force() {
    let (p, c) = build_swap_protocol_with(&SwapParams {
        timing_mutations: true,
        ..SwapParams::default()
    })
    .unwrap();
    for q in compliance_sets(2) {
        assert_eq!(compute_xi(&p, &c, 0, &q).unwrap().outcome_set(&p.task), brute_force_xi(&p, &c, &q));
    }
}

#[test]
fn growing_the_catalog_never_shrinks_xi() {
    let (p, full) = build_swap_protocol();
    let named = full.named_only();
    let empty = StrategyCatalog::empty();
    let (_, timing) = build_swap_protocol_with(&SwapParams {
        timing_mutations: true,
        ..SwapParams::default()
    })
    .unwrap();
    assert!(named.len() < full.len() && full.len() < timing.len());
    for q in compliance_sets(2) {
        let sets: Vec<_> = [&empty, &named, &full, &timing]
            .iter()
            .map(|c| compute_xi(&p, c, 0, &q).unwrap().outcome_set(&p.task))
            .collect();
        for w in sets.windows(2) {
            assert!(w[0].is_subset(&w[1]), "{q:?}");
        }
    }
}

#[test]
fn every_witness_replays_to_its_outcome() {
    let (p, c) = build_swap_protocol_with(&SwapParams {
        timing_mutations: true,
        ..SwapParams::default()
    })
    .unwrap();
    for table in compute_all_xi(&p, &c).unwrap() {
        for (&o, w) in &table.outcomes {
            assert_eq!(replay(&p, &c, w).unwrap().outcome, p.task.outputs()[o], "{w}");
        }
    }
}

#[test]
fn swap_verifies_and_failures_replay() {
    let report = verify(&build_swap_protocol().0, &build_swap_protocol().1).unwrap();
    assert!(report.passes());
    assert!(report.verdicts.iter().all(|v| !v.vacuous));

    let mut s = swap_scenario(&SwapParams::default());
    s.task.utility[3].values[0] = xchain_core::scenario::RationalText(xchain_core::task::utility(3));
    let (p, c) = s.compile().unwrap();
    let report = verify(&p, &c).unwrap();
    let nash = report.verdict(Property::CoalitionNash);
    assert!(!nash.pass);
    assert!(report.verdict(Property::Safety).pass && report.verdict(Property::Liveness).pass);
    let f = nash.failure.as_ref().unwrap();
    assert_eq!(f.outcome, vector("a↪B", "b↪B"));
    assert_eq!(replay(&p, &c, &f.witness).unwrap().outcome, f.outcome);
    assert!(!f.trace.is_empty());
    assert_eq!(f.baseline.as_ref().unwrap().0, vector("a↪B", "b↪A"));
}

#[test]
fn empty_catalog_is_reported_as_vacuous() {
    let (p, _) = build_swap_protocol();
    let report = verify(&p, &StrategyCatalog::empty()).unwrap();
    assert!(report.passes());
    assert!(!report.verdict(Property::Liveness).vacuous);
    assert!(report.verdict(Property::Safety).vacuous);
    assert!(report.verdict(Property::CoalitionNash).vacuous);
    assert!(report.notes.iter().any(|n| n.contains("no deviating strategy for A")));
    assert!(report.notes.iter().any(|n| n.contains("vacuously")));
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let (p, c) = build_swap_protocol_with(&SwapParams {
        timing_mutations: true,
        ..SwapParams::default()
    })
    .unwrap();
    let one = render_machine(&verify_with_jobs(&p, &c, 1).unwrap());
    for jobs in [2, 4, 16] {
        assert_eq!(render_machine(&verify_with_jobs(&p, &c, jobs).unwrap()), one);
    }
}

#[test]
fn scenario_round_trip_preserves_the_report() {
    let (p, c) = build_swap_protocol();
    let text = swap_scenario(&SwapParams::default()).to_toml_string();
    let (q, d) = Scenario::from_toml_str(&text).unwrap().compile().unwrap();
    assert_eq!(render_machine(&verify(&p, &c).unwrap()), render_machine(&verify(&q, &d).unwrap()));
}

const RACE: &str = r#"
name = "race"

[[party]]
name = "A"
knowledge = []

[[party]]
name = "B"
knowledge = []

[[contract]]
kind = "table"
name = "C"
states = ["s0", "sA", "sB"]
initial = ["s0"]
steps = [["s0", "A.go.C", "sA"], ["s0", "B.go.C", "sB"]]

[contract.outcomes]
s0 = "x0"
sA = "xA"
sB = "xB"

[task]
party_inputs = [["p", "q"]]
contract_inputs = [["x0"]]
outputs = OUTPUTS

[[task.utility]]
cell = [0, 0, 0]
values = [0, 0]

[[task.utility]]
cell = [0, 0, 1]
values = [1, 1]

EXTRA_ROW
[[strategy]]
kind = "script"
name = "go-a"
sends = [{ round = 0, contract = "C", function = "go" }]

[[strategy]]
kind = "script"
name = "go-b"
sends = [{ round = 0, contract = "C", function = "go" }]

[protocol.compliant]
A = "go-a"
B = "go-b"

[catalog]
generate = false

[checker]
exhaustive_order = true
"#;

const XB_ROW: &str = "[[task.utility]]\ncell = [0, 0, 2]\nvalues = [1, 1]\n";

#[test]
fn non_singleton_compliant_outcomes_are_flagged() {
    // Both calls land in the same round; either may be processed first.
    let text = RACE.replace("OUTPUTS", r#"[["x0"], ["xA"], ["xB"]]"#).replace("EXTRA_ROW", XB_ROW);
    let s = Scenario::from_toml_str(&text).unwrap();
    let (p, c) = s.compile().unwrap();
    let report = verify(&p, &c).unwrap();
    let all: BTreeSet<PartyId> = [PartyId(0), PartyId(1)].into();
    assert_eq!(report.table(0, &all).unwrap().outcomes.len(), 2);
    assert!(report.notes.iter().any(|n| n.contains("Nash compares every pair")));
    assert!(report.passes());
}

#[test]
fn undeclared_outcomes_are_a_model_mismatch() {
    let s = Scenario::from_toml_str(&RACE.replace("OUTPUTS", r#"[["x0"], ["xA"]]"#).replace("EXTRA_ROW", "")).unwrap();
    let (p, c) = s.compile().unwrap();
    match verify(&p, &c) {
        Err(CheckError::ModelMismatch { outcome, .. }) => assert_eq!(outcome, ContractStateVector::new(["xB"])),
        other => panic!("expected a model mismatch, got {other:?}"),
    }
}
