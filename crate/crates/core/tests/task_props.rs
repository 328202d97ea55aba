use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use proptest::prelude::*;
use xchain_core::swap::build_swap_task;
use xchain_core::task::{utility, Cell, Utility};
use xchain_core::{ContractStateVector, CrossChainTask, InputPartyVector, PartyId};

/// Random task with 3 parties, 1 contract, up to 2 party inputs, one
/// contract input and up to 4 outputs.
fn task() -> impl Strategy<Value = CrossChainTask> {
    (1usize..=2, 1usize..=4, prop::collection::vec(-2i64..=2, 24), prop::collection::vec(0usize..2, 6), any::<bool>())
        .prop_map(|(n_ip, n_out, raw, entries, include_input)| {
            let parties = vec!["P".to_string(), "Q".to_string(), "R".to_string()];
            let mut party_inputs: Vec<InputPartyVector> = (0..n_ip)
                .map(|i| InputPartyVector((0..3).map(|p| format!("x{}", entries[i * 3 + p])).collect()))
                .collect();
            if n_ip == 2 && party_inputs[0] == party_inputs[1] {
                party_inputs[1].0[2] = "z".into();
            }
            let mut outputs: Vec<ContractStateVector> = (1..=n_out).map(|o| ContractStateVector::new([format!("o{o}")])).collect();
            if include_input {
                outputs[0] = ContractStateVector::new(["o0"]);
            }
            let mut table = BTreeMap::new();
            for ip in 0..n_ip {
                for o in 0..n_out {
                    let row = (0..3).map(|p| utility(raw[(ip * 4 + o) * 3 + p])).collect();
                    table.insert(Cell::new(ip, 0, o), row);
                }
            }
            CrossChainTask::new(
                parties,
                vec!["C".into()],
                party_inputs,
                vec![ContractStateVector::new(["o0"])],
                outputs,
                table,
            )
            .unwrap()
        })
}

fn oracle_null(t: &CrossChainTask) -> bool {
    t.contract_inputs().iter().enumerate().all(|(ic, v)| {
        t.output_index(v).is_some_and(|o| {
            (0..t.party_inputs().len()).all(|ip| t.utilities(Cell::new(ip, ic, o)).unwrap().iter().all(|u| !u.is_negative()))
        })
    })
}

fn oracle_preferred(t: &CrossChainTask) -> bool {
    (0..t.party_inputs().len()).all(|ip| {
        (0..t.contract_inputs().len()).all(|ic| {
            (0..t.outputs().len()).any(|o| t.utilities(Cell::new(ip, ic, o)).unwrap().iter().all(|u| u.is_positive()))
        })
    })
}

fn oracle_robust(t: &CrossChainTask) -> bool {
    let n = t.party_inputs().len();
    for i in 0..n {
        for j in 0..n {
            for p in 0..t.parties().len() {
                if t.party_inputs()[i].0[p] != t.party_inputs()[j].0[p] {
                    continue;
                }
                for ic in 0..t.contract_inputs().len() {
                    for o in 0..t.outputs().len() {
                        let a = &t.utilities(Cell::new(i, ic, o)).unwrap()[p];
                        let b = &t.utilities(Cell::new(j, ic, o)).unwrap()[p];
                        if !a.is_negative() && b.is_negative() {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

fn subsets(n: usize) -> Vec<BTreeSet<PartyId>> {
    (0u32..1 << n).map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(PartyId).collect()).collect()
}

proptest! {
    #[test]
    fn feasibility_matches_brute_force(t in task()) {
        let report = t.check_feasibility();
        prop_assert_eq!(report.null_transition.pass, oracle_null(&t));
        prop_assert_eq!(report.preferred_exists.pass, oracle_preferred(&t));
        prop_assert_eq!(report.input_robustness.pass, oracle_robust(&t));
        prop_assert_eq!(report.null_transition.pass, report.null_transition.witness.is_none());
        prop_assert_eq!(report.input_robustness.pass, report.input_robustness.witness.is_none());
    }

    #[test]
    fn coalition_utility_is_additive(t in task(), a in 0usize..8, b in 0usize..8) {
        let sets = subsets(3);
        let (q1, q2) = (&sets[a], &sets[b]);
        prop_assume!(q1.is_disjoint(q2));
        let union: BTreeSet<PartyId> = q1.union(q2).copied().collect();
        for cell in t.cells() {
            let sum: Utility = t.coalition_utility_at(cell, q1).unwrap() + t.coalition_utility_at(cell, q2).unwrap();
            prop_assert_eq!(t.coalition_utility_at(cell, &union).unwrap(), sum);
        }
        prop_assert!(t.coalition_utility_at(Cell::new(0, 0, 0), &BTreeSet::new()).unwrap().is_zero());
    }

    #[test]
    fn preferred_implies_acceptable(t in task()) {
        for cell in t.cells() {
            let c = t.classify_cell(cell).unwrap();
            prop_assert!(!c.is_preferred() || c.is_acceptable());
        }
    }
}

#[test]
fn swap_task_is_feasible_by_exhaustion() {
    let t = build_swap_task();
    assert_eq!(t.cells().count(), 4);
    assert!(oracle_null(&t) && oracle_preferred(&t) && oracle_robust(&t));
    assert!(t.check_feasibility().passes());
}
