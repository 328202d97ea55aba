//! Deterministic contracts. A contract is either a hashed-timelock escrow or
//! an explicit state table; both expose an interface automaton and an
//! outcome label per state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{ActionId, AutomatonError, InterfaceAutomaton, StateId, Step};
use crate::swap::{HtlcContract, HtlcState};
use crate::value::Value;

/// Action name for `party` calling `function` on `contract`.
pub fn call_action(party: &str, function: &str, contract: &str) -> ActionId {
    ActionId::new(format!("{party}.{function}.{contract}"))
}

/// Splits `P.f.C` into its three parts.
pub fn split_call_action(action: &ActionId) -> Option<(&str, &str, &str)> {
    let mut parts = action.as_str().splitn(3, '.');
    Some((parts.next()?, parts.next()?, parts.next()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("contract {contract}: state `{state}` has no outcome label")]
    MissingOutcome { contract: String, state: String },
    #[error("contract {contract}: two steps leave `{state}` on `{action}`")]
    Nondeterministic { contract: String, state: String, action: String },
    #[error("contract {contract}: input `{action}` is not of the form Party.function.{contract}")]
    BadInput { contract: String, action: String },
    #[error("contract {contract}: timer on `{action}` from `{state}` has no matching internal step")]
    BadTimer { contract: String, state: String, action: String },
    #[error("contract {contract}: published values for unknown state `{state}`")]
    UnknownPublishState { contract: String, state: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub from: String,
    pub action: ActionId,
    /// Fires in the first round strictly later than `entered + after`.
    pub after: u64,
}

/// A contract given as an explicit deterministic state table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableContract {
    automaton: InterfaceAutomaton,
    transitions: BTreeMap<(String, ActionId), String>,
    outcomes: BTreeMap<String, String>,
    timers: Vec<Timer>,
    publish: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableState {
    pub state: String,
    pub entered: u64,
    pub published: Vec<Value>,
}

impl TableContract {
    /// Inputs are every step action that is not internal; each must name
    /// this contract as its target.
    pub fn new(
        name: &str,
        states: Vec<String>,
        initial: Vec<String>,
        internal: Vec<ActionId>,
        steps: Vec<(String, ActionId, String)>,
        outcomes: BTreeMap<String, String>,
        timers: Vec<Timer>,
        publish: BTreeMap<String, Vec<Value>>,
    ) -> Result<Self, ContractError> {
        let internal_set: BTreeSet<ActionId> = internal.iter().cloned().collect();
        let inputs: BTreeSet<ActionId> = steps
            .iter()
            .map(|(_, a, _)| a.clone())
            .filter(|a| !internal_set.contains(a))
            .collect();
        for a in &inputs {
            match split_call_action(a) {
                Some((_, _, c)) if c == name => {}
                _ => {
                    return Err(ContractError::BadInput {
                        contract: name.into(),
                        action: a.to_string(),
                    })
                }
            }
        }
        let mut transitions = BTreeMap::new();
        for (from, action, to) in &steps {
            if transitions.insert((from.clone(), action.clone()), to.clone()).is_some() {
                return Err(ContractError::Nondeterministic {
                    contract: name.into(),
                    state: from.clone(),
                    action: action.to_string(),
                });
            }
        }
        let automaton = InterfaceAutomaton::new(
            name,
            states.iter().map(|s| StateId::atom(s.as_str())),
            initial.iter().map(|s| StateId::atom(s.as_str())),
            inputs,
            [],
            internal_set.iter().cloned(),
            steps.iter().map(|(f, a, t)| Step::new(f.as_str(), a.clone(), t.as_str())),
        )?;
        if let Some(s) = states.iter().find(|s| !outcomes.contains_key(*s)) {
            return Err(ContractError::MissingOutcome {
                contract: name.into(),
                state: s.clone(),
            });
        }
        for t in &timers {
            if !internal_set.contains(&t.action) || !transitions.contains_key(&(t.from.clone(), t.action.clone())) {
                return Err(ContractError::BadTimer {
                    contract: name.into(),
                    state: t.from.clone(),
                    action: t.action.to_string(),
                });
            }
        }
        if let Some(s) = publish.keys().find(|s| !states.contains(s)) {
            return Err(ContractError::UnknownPublishState {
                contract: name.into(),
                state: s.clone(),
            });
        }
        Ok(TableContract {
            automaton,
            transitions,
            outcomes,
            timers,
            publish,
        })
    }

    pub fn automaton(&self) -> &InterfaceAutomaton {
        &self.automaton
    }

    pub fn outcomes(&self) -> &BTreeMap<String, String> {
        &self.outcomes
    }

    pub fn timers(&self) -> &[Timer] {
        &self.timers
    }

    pub fn publish(&self) -> &BTreeMap<String, Vec<Value>> {
        &self.publish
    }

    pub fn steps(&self) -> impl Iterator<Item = (&str, &ActionId, &str)> {
        self.transitions.iter().map(|((f, a), t)| (f.as_str(), a, t.as_str()))
    }

    fn enter(&self, state: &mut TableState, to: String, round: u64) {
        if let Some(values) = self.publish.get(&to) {
            for v in values {
                if !state.published.contains(v) {
                    state.published.push(v.clone());
                }
            }
        }
        state.state = to;
        state.entered = round;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Contract {
    Htlc(HtlcContract),
    Table(TableContract),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractState {
    Htlc(HtlcState),
    Table(TableState),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallResult {
    Accepted { action: ActionId },
    Rejected { action: ActionId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimerFired {
    pub action: ActionId,
    pub deadline: u64,
}

impl Contract {
    pub fn name(&self) -> &str {
        match self {
            Contract::Htlc(h) => &h.name,
            Contract::Table(t) => t.automaton.name(),
        }
    }

    /// The initial state whose outcome label is `label`, if any.
    pub fn initial_state_for(&self, label: &str) -> Option<ContractState> {
        match self {
            Contract::Htlc(h) => (label == h.owner_label()).then(|| ContractState::Htlc(HtlcState::default())),
            Contract::Table(t) => t
                .automaton
                .initial_states()
                .iter()
                .map(|s| s.components()[0].clone())
                .find(|s| t.outcomes.get(s).map(String::as_str) == Some(label))
                .map(|state| {
                    let mut st = TableState {
                        state: String::new(),
                        entered: 0,
                        published: Vec::new(),
                    };
                    t.enter(&mut st, state, 0);
                    ContractState::Table(st)
                }),
        }
    }

    /// Labels of all initial states, in state order.
    pub fn initial_labels(&self) -> Vec<String> {
        match self {
            Contract::Htlc(h) => vec![h.owner_label()],
            Contract::Table(t) => t
                .automaton
                .initial_states()
                .iter()
                .filter_map(|s| t.outcomes.get(&s.components()[0]).cloned())
                .collect(),
        }
    }

    /// Every outcome label some state of this contract can carry.
    pub fn all_labels(&self) -> BTreeSet<String> {
        match self {
            Contract::Htlc(h) => [h.owner_label(), h.beneficiary_label(), h.escrow_label()].into(),
            Contract::Table(t) => t.outcomes.values().cloned().collect(),
        }
    }

    pub fn apply_call(
        &self,
        state: &mut ContractState,
        sender: &str,
        function: &str,
        payload: &[Value],
        round: u64,
    ) -> CallResult {
        let action = call_action(sender, function, self.name());
        match (self, state) {
            (Contract::Htlc(h), ContractState::Htlc(s)) => match h.apply_call(s, sender, function, payload, round) {
                Ok(()) => CallResult::Accepted { action },
                Err(reason) => CallResult::Rejected { action, reason },
            },
            (Contract::Table(t), ContractState::Table(s)) => {
                match t.transitions.get(&(s.state.clone(), action.clone())) {
                    Some(to) => {
                        t.enter(s, to.clone(), round);
                        CallResult::Accepted { action }
                    }
                    None => CallResult::Rejected {
                        action,
                        reason: format!("not enabled in {}", s.state),
                    },
                }
            }
            _ => CallResult::Rejected {
                action,
                reason: "state does not belong to this contract".into(),
            },
        }
    }

    /// Fires the first due timer, if any. Called at the start of the
    /// contract-local phase, before messages are processed.
    pub fn fire_timer(&self, state: &mut ContractState, round: u64) -> Option<TimerFired> {
        match (self, state) {
            (Contract::Htlc(h), ContractState::Htlc(s)) => h.fire_timer(s, round),
            (Contract::Table(t), ContractState::Table(s)) => {
                let timer = t
                    .timers
                    .iter()
                    .find(|tm| tm.from == s.state && round > s.entered + tm.after)?;
                let deadline = s.entered + timer.after;
                let to = t.transitions[&(s.state.clone(), timer.action.clone())].clone();
                t.enter(s, to, round);
                Some(TimerFired {
                    action: timer.action.clone(),
                    deadline,
                })
            }
            _ => None,
        }
    }

    pub fn has_pending_timer(&self, state: &ContractState) -> bool {
        match (self, state) {
            (Contract::Htlc(h), ContractState::Htlc(s)) => h.has_pending_timer(s),
            (Contract::Table(t), ContractState::Table(s)) => t.timers.iter().any(|tm| tm.from == s.state),
            _ => false,
        }
    }

    /// Name of the automaton state `state` corresponds to.
    pub fn phase(&self, state: &ContractState) -> String {
        match state {
            ContractState::Htlc(s) => s.phase.to_string(),
            ContractState::Table(s) => s.state.clone(),
        }
    }

    pub fn outcome_label(&self, state: &ContractState) -> String {
        match (self, state) {
            (Contract::Htlc(h), ContractState::Htlc(s)) => h.outcome_label(s),
            (Contract::Table(t), ContractState::Table(s)) => t.outcomes[&s.state].clone(),
            _ => String::from("?"),
        }
    }

    pub fn published<'a>(&self, state: &'a ContractState) -> &'a [Value] {
        match state {
            ContractState::Htlc(s) => &s.published,
            ContractState::Table(s) => &s.published,
        }
    }

    pub fn automaton(&self, parties: &[String]) -> InterfaceAutomaton {
        match self {
            Contract::Htlc(h) => h.automaton(parties),
            Contract::Table(t) => t.automaton.clone(),
        }
    }
}
