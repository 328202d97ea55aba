//! Explicit finite interface automata: composability, products and
//! execution fragments.
//!
//! Both parties and contracts are described by an [`InterfaceAutomaton`].
//! A whole cross-chain system is the left-associated product of its parties
//! (in declaration order) followed by its contracts, see [`compose_all`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Globally unique action name. Two automata that mention the same
/// identifier talk about the same action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(String);

impl ActionId {
    pub fn new(name: impl Into<String>) -> Self {
        ActionId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ActionId {
    fn from(s: &str) -> Self {
        ActionId::new(s)
    }
}

/// State identifier. Atomic automata use one-element tuples; products
/// concatenate the tuples of their components, so the state of an n-fold
/// product is an n-tuple in composition order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(Vec<String>);

impl StateId {
    pub fn atom(name: impl Into<String>) -> Self {
        StateId(vec![name.into()])
    }

    pub fn tuple(parts: Vec<String>) -> Self {
        StateId(parts)
    }

    pub fn pair(a: &StateId, b: &StateId) -> Self {
        let mut parts = a.0.clone();
        parts.extend(b.0.iter().cloned());
        StateId(parts)
    }

    pub fn components(&self) -> &[String] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return f.write_str(&self.0[0]);
        }
        write!(f, "({})", self.0.join(","))
    }
}

impl From<&str> for StateId {
    fn from(s: &str) -> Self {
        StateId::atom(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
}

impl Step {
    pub fn new(from: impl Into<StateId>, action: impl Into<ActionId>, to: impl Into<StateId>) -> Self {
        Step {
            from: from.into(),
            action: action.into(),
            to: to.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("automaton `{automaton}` has no initial state")]
    NoInitialState { automaton: String },
    #[error("automaton `{automaton}`: initial state {state} is not a declared state")]
    UnknownInitialState { automaton: String, state: StateId },
    #[error("automaton `{automaton}`: action `{action}` is declared in more than one of input/output/internal")]
    OverlappingPartition { automaton: String, action: ActionId },
    #[error("automaton `{automaton}`: step {from} --{action}--> {to} leaves the declared states")]
    StepOutsideStates {
        automaton: String,
        from: StateId,
        action: ActionId,
        to: StateId,
    },
    #[error("automaton `{automaton}`: step uses undeclared action `{action}`")]
    UndeclaredAction { automaton: String, action: ActionId },
    #[error("automaton `{automaton}`: state identifiers have mixed tuple arity")]
    MixedArity { automaton: String },
    #[error("automaton `{automaton}` has no state {state}")]
    UnknownState { automaton: String, state: StateId },
    #[error("`{left}` and `{right}` are not composable: {report}")]
    NotComposable {
        left: String,
        right: String,
        report: ComposabilityReport,
    },
    #[error("cannot compose an empty list of automata")]
    EmptyComposition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceAutomaton {
    name: String,
    states: BTreeSet<StateId>,
    initial: BTreeSet<StateId>,
    inputs: BTreeSet<ActionId>,
    outputs: BTreeSet<ActionId>,
    internal: BTreeSet<ActionId>,
    steps: BTreeSet<Step>,
}

impl InterfaceAutomaton {
    /// Builds an automaton and checks its well-formedness invariants.
    pub fn new(
        name: impl Into<String>,
        states: impl IntoIterator<Item = StateId>,
        initial: impl IntoIterator<Item = StateId>,
        inputs: impl IntoIterator<Item = ActionId>,
        outputs: impl IntoIterator<Item = ActionId>,
        internal: impl IntoIterator<Item = ActionId>,
        steps: impl IntoIterator<Item = Step>,
    ) -> Result<Self, AutomatonError> {
        let automaton = InterfaceAutomaton {
            name: name.into(),
            states: states.into_iter().collect(),
            initial: initial.into_iter().collect(),
            inputs: inputs.into_iter().collect(),
            outputs: outputs.into_iter().collect(),
            internal: internal.into_iter().collect(),
            steps: steps.into_iter().collect(),
        };
        automaton.check()?;
        Ok(automaton)
    }

    fn check(&self) -> Result<(), AutomatonError> {
        let name = || self.name.clone();
        if self.initial.is_empty() {
            return Err(AutomatonError::NoInitialState { automaton: name() });
        }
        if let Some(state) = self.initial.iter().find(|s| !self.states.contains(*s)) {
            return Err(AutomatonError::UnknownInitialState {
                automaton: name(),
                state: state.clone(),
            });
        }
        let mut arities = self.states.iter().map(StateId::arity);
        if let Some(first) = arities.next() {
            if arities.any(|a| a != first) {
                return Err(AutomatonError::MixedArity { automaton: name() });
            }
        }
        let overlap = self
            .inputs
            .intersection(&self.outputs)
            .chain(self.inputs.intersection(&self.internal))
            .chain(self.outputs.intersection(&self.internal))
            .next();
        if let Some(action) = overlap {
            return Err(AutomatonError::OverlappingPartition {
                automaton: name(),
                action: action.clone(),
            });
        }
        for step in &self.steps {
            if !self.states.contains(&step.from) || !self.states.contains(&step.to) {
                return Err(AutomatonError::StepOutsideStates {
                    automaton: name(),
                    from: step.from.clone(),
                    action: step.action.clone(),
                    to: step.to.clone(),
                });
            }
            if !self.has_action(&step.action) {
                return Err(AutomatonError::UndeclaredAction {
                    automaton: name(),
                    action: step.action.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn initial_states(&self) -> &BTreeSet<StateId> {
        &self.initial
    }

    pub fn inputs(&self) -> &BTreeSet<ActionId> {
        &self.inputs
    }

    pub fn outputs(&self) -> &BTreeSet<ActionId> {
        &self.outputs
    }

    pub fn internal(&self) -> &BTreeSet<ActionId> {
        &self.internal
    }

    pub fn steps(&self) -> &BTreeSet<Step> {
        &self.steps
    }

    /// Union of the three action partitions.
    pub fn actions(&self) -> BTreeSet<ActionId> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.internal)
            .cloned()
            .collect()
    }

    pub fn has_action(&self, action: &ActionId) -> bool {
        self.inputs.contains(action) || self.outputs.contains(action) || self.internal.contains(action)
    }

    pub fn enabled_actions(&self, state: &StateId) -> Result<BTreeSet<ActionId>, AutomatonError> {
        if !self.states.contains(state) {
            return Err(AutomatonError::UnknownState {
                automaton: self.name.clone(),
                state: state.clone(),
            });
        }
        Ok(self
            .steps
            .iter()
            .filter(|s| &s.from == state)
            .map(|s| s.action.clone())
            .collect())
    }

    /// Targets of `action` from `state`, in state order.
    pub fn successors<'a>(
        &'a self,
        state: &'a StateId,
        action: &'a ActionId,
    ) -> impl Iterator<Item = &'a StateId> + 'a {
        self.steps
            .iter()
            .filter(move |s| &s.from == state && &s.action == action)
            .map(|s| &s.to)
    }

    pub fn is_deterministic(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.steps.iter().all(|s| seen.insert((&s.from, &s.action)))
    }

    /// States reachable from the initial states by any step.
    pub fn reachable_states(&self) -> BTreeSet<StateId> {
        let mut by_source: BTreeMap<&StateId, Vec<&StateId>> = BTreeMap::new();
        for step in &self.steps {
            by_source.entry(&step.from).or_default().push(&step.to);
        }
        let mut seen: BTreeSet<StateId> = self.initial.clone();
        let mut queue: VecDeque<&StateId> = self.initial.iter().collect();
        while let Some(state) = queue.pop_front() {
            for next in by_source.get(state).into_iter().flatten() {
                if seen.insert((*next).clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// `Shared(a, b)`: actions that appear anywhere in both automata.
pub fn shared_actions(a: &InterfaceAutomaton, b: &InterfaceAutomaton) -> BTreeSet<ActionId> {
    a.actions().intersection(&b.actions()).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1: inputs overlap, 2: outputs overlap, 3: left internal meets right,
    /// 4: right internal meets left.
    pub condition: u8,
    pub offending: BTreeSet<ActionId>,
}

impl Violation {
    pub fn describe(&self) -> &'static str {
        match self.condition {
            1 => "input actions overlap",
            2 => "output actions overlap",
            3 => "internal actions of the left automaton are visible to the right",
            _ => "internal actions of the right automaton are visible to the left",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposabilityReport {
    pub violations: Vec<Violation>,
}

impl ComposabilityReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated_conditions(&self) -> Vec<u8> {
        self.violations.iter().map(|v| v.condition).collect()
    }
}

impl fmt::Display for ComposabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passes() {
            return f.write_str("composable");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let names: Vec<&str> = v.offending.iter().map(ActionId::as_str).collect();
            write!(f, "condition {} ({}): {{{}}}", v.condition, v.describe(), names.join(", "))?;
        }
        Ok(())
    }
}

pub fn check_composability(a: &InterfaceAutomaton, b: &InterfaceAutomaton) -> ComposabilityReport {
    let b_all = b.actions();
    let a_all = a.actions();
    let candidates: [(u8, BTreeSet<ActionId>); 4] = [
        (1, a.inputs.intersection(&b.inputs).cloned().collect()),
        (2, a.outputs.intersection(&b.outputs).cloned().collect()),
        (3, a.internal.intersection(&b_all).cloned().collect()),
        (4, b.internal.intersection(&a_all).cloned().collect()),
    ];
    ComposabilityReport {
        violations: candidates
            .into_iter()
            .filter(|(_, offending)| !offending.is_empty())
            .map(|(condition, offending)| Violation { condition, offending })
            .collect(),
    }
}

/// Product of two composable automata: private actions interleave, shared
/// actions synchronise and become internal.
pub fn compose(a: &InterfaceAutomaton, b: &InterfaceAutomaton) -> Result<InterfaceAutomaton, AutomatonError> {
    let report = check_composability(a, b);
    if !report.passes() {
        return Err(AutomatonError::NotComposable {
            left: a.name.clone(),
            right: b.name.clone(),
            report,
        });
    }
    let shared = shared_actions(a, b);

    let states: BTreeSet<StateId> = a
        .states
        .iter()
        .flat_map(|v| b.states.iter().map(move |u| StateId::pair(v, u)))
        .collect();
    let initial: BTreeSet<StateId> = a
        .initial
        .iter()
        .flat_map(|v| b.initial.iter().map(move |u| StateId::pair(v, u)))
        .collect();
    let inputs: BTreeSet<ActionId> = a.inputs.union(&b.inputs).filter(|x| !shared.contains(*x)).cloned().collect();
    let outputs: BTreeSet<ActionId> = a.outputs.union(&b.outputs).filter(|x| !shared.contains(*x)).cloned().collect();
    let internal: BTreeSet<ActionId> = a
        .internal
        .iter()
        .chain(&b.internal)
        .chain(&shared)
        .cloned()
        .collect();

    let mut b_by_action: BTreeMap<&ActionId, Vec<&Step>> = BTreeMap::new();
    for step in &b.steps {
        b_by_action.entry(&step.action).or_default().push(step);
    }

    let mut steps = BTreeSet::new();
    for step in &a.steps {
        if shared.contains(&step.action) {
            for partner in b_by_action.get(&step.action).into_iter().flatten() {
                steps.insert(Step {
                    from: StateId::pair(&step.from, &partner.from),
                    action: step.action.clone(),
                    to: StateId::pair(&step.to, &partner.to),
                });
            }
        } else {
            for u in &b.states {
                steps.insert(Step {
                    from: StateId::pair(&step.from, u),
                    action: step.action.clone(),
                    to: StateId::pair(&step.to, u),
                });
            }
        }
    }
    for step in b.steps.iter().filter(|s| !shared.contains(&s.action)) {
        for v in &a.states {
            steps.insert(Step {
                from: StateId::pair(v, &step.from),
                action: step.action.clone(),
                to: StateId::pair(v, &step.to),
            });
        }
    }

    InterfaceAutomaton::new(
        format!("{}⊗{}", a.name, b.name),
        states,
        initial,
        inputs,
        outputs,
        internal,
        steps,
    )
}

/// Left-associated product of a non-empty list.
pub fn compose_all(automata: &[InterfaceAutomaton]) -> Result<InterfaceAutomaton, AutomatonError> {
    let (first, rest) = automata.split_first().ok_or(AutomatonError::EmptyComposition)?;
    rest.iter().try_fold(first.clone(), |acc, next| compose(&acc, next))
}

/// Alternating sequence `v0, a0, v1, ..., vt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionFragment {
    states: Vec<StateId>,
    actions: Vec<ActionId>,
}

impl ExecutionFragment {
    pub fn start(state: StateId) -> Self {
        ExecutionFragment {
            states: vec![state],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: ActionId, state: StateId) {
        self.actions.push(action);
        self.states.push(state);
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The fragment truncated to its first `n` actions.
    pub fn prefix(&self, n: usize) -> ExecutionFragment {
        let n = n.min(self.actions.len());
        ExecutionFragment {
            states: self.states[..=n].to_vec(),
            actions: self.actions[..n].to_vec(),
        }
    }

    pub fn last_state(&self) -> &StateId {
        self.states.last().expect("fragment always holds a state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentVerdict {
    Valid,
    /// Smallest `i` such that `(v_i, a_i, v_{i+1})` is not a step. A
    /// zero-action fragment whose only state is unknown is invalid at 0.
    InvalidAt(usize),
}

impl FragmentVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, FragmentVerdict::Valid)
    }
}

pub fn validate_fragment(automaton: &InterfaceAutomaton, fragment: &ExecutionFragment) -> FragmentVerdict {
    if fragment.actions.is_empty() {
        return if automaton.states.contains(&fragment.states[0]) {
            FragmentVerdict::Valid
        } else {
            FragmentVerdict::InvalidAt(0)
        };
    }
    for (i, action) in fragment.actions.iter().enumerate() {
        let step = Step {
            from: fragment.states[i].clone(),
            action: action.clone(),
            to: fragment.states[i + 1].clone(),
        };
        if !automaton.steps.contains(&step) {
            return FragmentVerdict::InvalidAt(i);
        }
    }
    FragmentVerdict::Valid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<ActionId> {
        names.iter().map(|n| ActionId::new(*n)).collect()
    }

    fn states(names: &[&str]) -> Vec<StateId> {
        names.iter().map(|n| StateId::atom(*n)).collect()
    }

    fn single_step() -> InterfaceAutomaton {
        InterfaceAutomaton::new(
            "one",
            states(&["v0", "v1"]),
            states(&["v0"]),
            ids(&[]),
            ids(&["x"]),
            ids(&[]),
            [Step::new("v0", "x", "v1")],
        )
        .unwrap()
    }

    fn trivial() -> InterfaceAutomaton {
        InterfaceAutomaton::new("unit", states(&["z"]), states(&["z"]), [], [], [], []).unwrap()
    }

    #[test]
    fn enabled_actions_from_definition() {
        let a = single_step();
        assert_eq!(a.enabled_actions(&"v0".into()).unwrap(), ids(&["x"]).into_iter().collect());
        assert!(a.enabled_actions(&"v1".into()).unwrap().is_empty());
        assert!(matches!(
            a.enabled_actions(&"nope".into()),
            Err(AutomatonError::UnknownState { .. })
        ));
    }

    #[test]
    fn rejects_malformed_automata() {
        let overlap = InterfaceAutomaton::new("bad", states(&["v"]), states(&["v"]), ids(&["x"]), ids(&["x"]), [], []);
        assert!(matches!(overlap, Err(AutomatonError::OverlappingPartition { .. })));
        let no_init = InterfaceAutomaton::new("bad", states(&["v"]), [], [], [], [], []);
        assert!(matches!(no_init, Err(AutomatonError::NoInitialState { .. })));
        let stray = InterfaceAutomaton::new("bad", states(&["v"]), states(&["v"]), ids(&["x"]), [], [], [Step::new("v", "x", "w")]);
        assert!(matches!(stray, Err(AutomatonError::StepOutsideStates { .. })));
        let undeclared = InterfaceAutomaton::new("bad", states(&["v"]), states(&["v"]), [], [], [], [Step::new("v", "y", "v")]);
        assert!(matches!(undeclared, Err(AutomatonError::UndeclaredAction { .. })));
    }

    #[test]
    fn shared_actions_is_intersection() {
        let a = InterfaceAutomaton::new("a", states(&["u"]), states(&["u"]), [], ids(&["m"]), [], []).unwrap();
        let b = InterfaceAutomaton::new("b", states(&["w"]), states(&["w"]), ids(&["m"]), [], [], []).unwrap();
        assert_eq!(shared_actions(&a, &b), ids(&["m"]).into_iter().collect());
        assert!(shared_actions(&a, &trivial()).is_empty());
    }

    #[test]
    fn composability_conditions() {
        let a = InterfaceAutomaton::new("a", states(&["u"]), states(&["u"]), ids(&["x"]), [], ids(&["h"]), []).unwrap();
        let b = InterfaceAutomaton::new("b", states(&["w"]), states(&["w"]), ids(&["x", "h"]), [], [], []).unwrap();
        let report = check_composability(&a, &b);
        assert_eq!(report.violated_conditions(), vec![1, 3]);
        assert_eq!(report.violations[0].offending, ids(&["x"]).into_iter().collect());
        assert_eq!(report.violations[1].offending, ids(&["h"]).into_iter().collect());

        let c = InterfaceAutomaton::new("c", states(&["w"]), states(&["w"]), ids(&["x"]), [], [], []).unwrap();
        let r = check_composability(&a, &c);
        assert_eq!(r.violated_conditions(), vec![1]);
        assert_eq!(r.violations[0].offending, ids(&["x"]).into_iter().collect());
        assert!(check_composability(&trivial(), &a).passes());
        assert!(matches!(compose(&a, &b), Err(AutomatonError::NotComposable { .. })));
    }

    #[test]
    fn synchronised_step_becomes_internal() {
        let a = InterfaceAutomaton::new("a", states(&["u0", "u1"]), states(&["u0"]), [], ids(&["m"]), [], [Step::new("u0", "m", "u1")]).unwrap();
        let b = InterfaceAutomaton::new("b", states(&["w0", "w1"]), states(&["w0"]), ids(&["m"]), [], [], [Step::new("w0", "m", "w1")]).unwrap();
        let p = compose(&a, &b).unwrap();
        let u0w0 = StateId::tuple(vec!["u0".into(), "w0".into()]);
        let u1w1 = StateId::tuple(vec!["u1".into(), "w1".into()]);
        assert_eq!(p.steps().len(), 1);
        assert!(p.steps().contains(&Step { from: u0w0.clone(), action: "m".into(), to: u1w1 }));
        assert!(p.internal().contains(&ActionId::new("m")));
        assert!(p.inputs().is_empty() && p.outputs().is_empty());
        assert_eq!(p.initial_states().iter().collect::<Vec<_>>(), vec![&u0w0]);
        assert_eq!(u0w0.to_string(), "(u0,w0)");
    }

    #[test]
    fn unit_composition_is_identity_up_to_pairing() {
        let b = single_step();
        let p = compose(&trivial(), &b).unwrap();
        assert_eq!(p.states().len(), b.states().len());
        assert_eq!(p.steps().len(), b.steps().len());
        assert_eq!(p.outputs(), b.outputs());
        for step in b.steps() {
            let z = StateId::atom("z");
            assert!(p.steps().contains(&Step {
                from: StateId::pair(&z, &step.from),
                action: step.action.clone(),
                to: StateId::pair(&z, &step.to),
            }));
        }
    }

    #[test]
    fn compose_all_folds_left() {
        let a = single_step();
        assert_eq!(compose_all(std::slice::from_ref(&a)).unwrap(), a);
        let pair = [trivial(), single_step()];
        assert_eq!(compose_all(&pair).unwrap(), compose(&pair[0], &pair[1]).unwrap());
        assert!(matches!(compose_all(&[]), Err(AutomatonError::EmptyComposition)));
    }

    #[test]
    fn fragments() {
        let a = single_step();
        assert_eq!(validate_fragment(&a, &ExecutionFragment::start("v0".into())), FragmentVerdict::Valid);
        assert_eq!(validate_fragment(&a, &ExecutionFragment::start("zz".into())), FragmentVerdict::InvalidAt(0));
        let mut bad = ExecutionFragment::start("v1".into());
        bad.push("x".into(), "v0".into());
        assert_eq!(validate_fragment(&a, &bad), FragmentVerdict::InvalidAt(0));
        let mut good = ExecutionFragment::start("v0".into());
        good.push("x".into(), "v1".into());
        assert!(validate_fragment(&a, &good).is_valid());
        assert!(validate_fragment(&a, &good.prefix(0)).is_valid());
    }
}
