//! Four-phase synchronous rounds: send, contract-local, read, party-local.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{ActionId, ExecutionFragment, InterfaceAutomaton, StateId};
use crate::contract::{call_action, CallResult, Contract, ContractState};
use crate::strategy::{LocalState, Outgoing, StrategyRef, View};
use crate::task::{ContractId, ContractStateVector, PartyId};
use crate::trace::{EventKind, TraceEvent};
use crate::value::{KnowledgeSet, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyInfo {
    pub name: String,
    /// Longer human name, e.g. `Alice` for `A`.
    pub display: String,
    pub knowledge: Vec<Value>,
}

/// Static part of a cross-chain system: who exists and how long messages
/// may take.
#[derive(Debug, Clone)]
pub struct System {
    pub parties: Vec<PartyInfo>,
    pub contracts: Vec<Contract>,
    pub delta: u64,
}

impl System {
    pub fn party_names(&self) -> Vec<String> {
        self.parties.iter().map(|p| p.name.clone()).collect()
    }

    pub fn party_index(&self, name: &str) -> Option<PartyId> {
        self.parties
            .iter()
            .position(|p| p.name == name || p.display == name)
            .map(PartyId)
    }

    pub fn contract_index(&self, name: &str) -> Option<ContractId> {
        self.contracts.iter().position(|c| c.name() == name).map(ContractId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("round {round}: {party} tried to use {value}, which it cannot produce")]
    KnowledgeViolation { round: u64, party: String, value: Value },
    #[error("round {round}: {party} addressed unknown contract index {contract}")]
    UnknownContract { round: u64, party: String, contract: usize },
    #[error("contract {contract} has no initial state labelled `{label}`")]
    UnknownInitialLabel { contract: String, label: String },
    #[error("contract input vector has {got} entries, expected {expected}")]
    InputArity { got: usize, expected: usize },
    #[error("binding has {got} strategies for {expected} parties")]
    BindingArity { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryPolicy {
    /// Every message arrives in the round it is sent.
    Immediate,
    /// Every message takes the full delay bound.
    AdversarialMax,
    /// Each message independently takes any delay in `0..=delta`.
    Exhaustive,
}

impl DeliveryPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            DeliveryPolicy::Immediate => "immediate",
            DeliveryPolicy::AdversarialMax => "adversarial-max",
            DeliveryPolicy::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "immediate" => Some(DeliveryPolicy::Immediate),
            "adversarial-max" => Some(DeliveryPolicy::AdversarialMax),
            "exhaustive" => Some(DeliveryPolicy::Exhaustive),
            _ => None,
        }
    }
}

/// A complete description of the nondeterminism resolved in one run.
/// `choices` are consumed in order at every choice point (delays under the
/// exhaustive policy, message picks under exhaustive ordering); missing
/// entries default to 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Schedule {
    pub policy: DeliveryPolicy,
    pub exhaustive_order: bool,
    pub choices: Vec<usize>,
}

impl Schedule {
    pub fn new(policy: DeliveryPolicy) -> Self {
        Schedule {
            policy,
            exhaustive_order: false,
            choices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: PartyId,
    pub target: ContractId,
    pub function: String,
    pub payload: Vec<Value>,
    pub send_round: u64,
    pub deliver_round: u64,
    pub seq: u64,
}

/// Total order by delivery round, sender, function, payload, then send
/// sequence number.
pub fn canonical_message_order(mut messages: Vec<Message>) -> Vec<Message> {
    messages.sort_by(|a, b| {
        (a.deliver_round, a.sender, &a.function, &a.payload, a.seq)
            .cmp(&(b.deliver_round, b.sender, &b.function, &b.payload, b.seq))
    });
    messages
}

/// Strategy per party plus the coalitions whose knowledge is pooled.
#[derive(Debug, Clone)]
pub struct Binding {
    pub strategies: Vec<StrategyRef>,
    pub coalitions: Vec<Vec<PartyId>>,
}

impl Binding {
    pub fn solo(strategies: Vec<StrategyRef>) -> Self {
        Binding {
            strategies,
            coalitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundState {
    pub round: u64,
    pub contract_states: Vec<ContractState>,
    pub locals: Vec<LocalState>,
    pub knowledge: Vec<KnowledgeSet>,
    pub in_flight: Vec<Message>,
    pub staged: Vec<Vec<Outgoing>>,
    pub disclosures: Vec<(PartyId, PartyId, Value)>,
    pub trace: Vec<TraceEvent>,
    next_seq: u64,
}

impl RoundState {
    pub fn initial(system: &System, inputs: &ContractStateVector) -> Result<Self, SimError> {
        if inputs.0.len() != system.contracts.len() {
            return Err(SimError::InputArity {
                got: inputs.0.len(),
                expected: system.contracts.len(),
            });
        }
        let contract_states = system
            .contracts
            .iter()
            .zip(&inputs.0)
            .map(|(c, label)| {
                c.initial_state_for(label).ok_or_else(|| SimError::UnknownInitialLabel {
                    contract: c.name().to_string(),
                    label: label.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        let m = system.parties.len();
        Ok(RoundState {
            round: 0,
            contract_states,
            locals: vec![LocalState::default(); m],
            knowledge: system.parties.iter().map(|p| KnowledgeSet::from_values(&p.knowledge)).collect(),
            in_flight: Vec::new(),
            staged: vec![Vec::new(); m],
            disclosures: Vec::new(),
            trace: Vec::new(),
            next_seq: 0,
        })
    }

    pub fn outcome(&self, system: &System) -> ContractStateVector {
        ContractStateVector(
            system
                .contracts
                .iter()
                .zip(&self.contract_states)
                .map(|(c, s)| c.outcome_label(s))
                .collect(),
        )
    }

    pub fn phases(&self, system: &System) -> Vec<String> {
        system
            .contracts
            .iter()
            .zip(&self.contract_states)
            .map(|(c, s)| c.phase(s))
            .collect()
    }
}

/// Records the choices made at each choice point; replays a forced prefix.
#[derive(Debug, Clone, Default)]
struct Chooser {
    forced: Vec<usize>,
    made: Vec<(usize, usize)>,
}

impl Chooser {
    fn choose(&mut self, arity: usize) -> usize {
        if arity <= 1 {
            return 0;
        }
        let c = self.forced.get(self.made.len()).copied().unwrap_or(0).min(arity - 1);
        self.made.push((c, arity));
        c
    }
}

/// The next choice vector in depth-first order after a run that made
/// `made` choices, or `None` when the tree is exhausted.
pub fn next_choices(made: &[(usize, usize)]) -> Option<Vec<usize>> {
    let i = made.iter().rposition(|(c, arity)| c + 1 < *arity)?;
    let mut next: Vec<usize> = made[..i].iter().map(|(c, _)| *c).collect();
    next.push(made[i].0 + 1);
    Some(next)
}

pub struct Simulation<'a> {
    system: &'a System,
    binding: &'a Binding,
    policy: DeliveryPolicy,
    exhaustive_order: bool,
    chooser: Chooser,
    names: Vec<String>,
}

impl<'a> Simulation<'a> {
    pub fn new(system: &'a System, binding: &'a Binding, schedule: &Schedule) -> Result<Self, SimError> {
        if binding.strategies.len() != system.parties.len() {
            return Err(SimError::BindingArity {
                got: binding.strategies.len(),
                expected: system.parties.len(),
            });
        }
        Ok(Simulation {
            system,
            binding,
            policy: schedule.policy,
            exhaustive_order: schedule.exhaustive_order,
            chooser: Chooser {
                forced: schedule.choices.clone(),
                made: Vec::new(),
            },
            names: system.party_names(),
        })
    }

    /// Choice points resolved so far, as `(choice, arity)` pairs.
    pub fn choices_made(&self) -> &[(usize, usize)] {
        &self.chooser.made
    }

    fn view<'s>(&'s self, state: &'s RoundState, party: PartyId) -> View<'s> {
        View {
            round: state.round,
            party,
            delta: self.system.delta,
            parties: &self.names,
            knowledge: &state.knowledge[party.0],
            contracts: &self.system.contracts,
            states: &state.contract_states,
        }
    }

    pub fn run_round(&mut self, state: &mut RoundState) -> Result<(), SimError> {
        self.phase_send(state);
        self.phase_contracts(state);
        self.phase_read(state);
        self.phase_decide(state)?;
        state.round += 1;
        Ok(())
    }

    fn phase_send(&mut self, state: &mut RoundState) {
        let r = state.round;
        for p in 0..state.staged.len() {
            for out in std::mem::take(&mut state.staged[p]) {
                let delay = match self.policy {
                    DeliveryPolicy::Immediate => 0,
                    DeliveryPolicy::AdversarialMax => self.system.delta,
                    DeliveryPolicy::Exhaustive => self.chooser.choose(self.system.delta as usize + 1) as u64,
                };
                let contract = self.system.contracts[out.contract.0].name();
                state.trace.push(TraceEvent {
                    round: r,
                    phase: 1,
                    actor: self.names[p].clone(),
                    kind: EventKind::Send,
                    action: call_action(&self.names[p], &out.function, contract).to_string(),
                    payload: out.payload.iter().map(Value::to_string).collect(),
                    state: format!("deliver@{}", r + delay),
                });
                state.in_flight.push(Message {
                    sender: PartyId(p),
                    target: out.contract,
                    function: out.function,
                    payload: out.payload,
                    send_round: r,
                    deliver_round: r + delay,
                    seq: state.next_seq,
                });
                state.next_seq += 1;
            }
        }
    }

    fn phase_contracts(&mut self, state: &mut RoundState) {
        let r = state.round;
        for (c, contract) in self.system.contracts.iter().enumerate() {
            let cs = &mut state.contract_states[c];
            if let Some(fired) = contract.fire_timer(cs, r) {
                state.trace.push(TraceEvent {
                    round: r,
                    phase: 2,
                    actor: contract.name().to_string(),
                    kind: EventKind::Timeout,
                    action: fired.action.to_string(),
                    payload: vec![Value::plain(fired.deadline).to_string()],
                    state: contract.phase(cs),
                });
            }

            let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut state.in_flight)
                .into_iter()
                .partition(|m| m.target.0 == c && m.deliver_round <= r);
            state.in_flight = rest;
            let mut remaining = canonical_message_order(due);
            let mut ordered = Vec::with_capacity(remaining.len());
            if self.exhaustive_order {
                while !remaining.is_empty() {
                    let i = self.chooser.choose(remaining.len());
                    ordered.push(remaining.remove(i));
                }
            } else {
                ordered = remaining;
            }

            for msg in ordered {
                let sender = &self.names[msg.sender.0];
                let cs = &mut state.contract_states[c];
                let result = contract.apply_call(cs, sender, &msg.function, &msg.payload, r);
                let (kind, action, state_text) = match result {
                    CallResult::Accepted { action } => (EventKind::Step, action, contract.phase(cs)),
                    CallResult::Rejected { action, reason } => {
                        (EventKind::Reject, action, format!("{} ({reason})", contract.phase(cs)))
                    }
                };
                state.trace.push(TraceEvent {
                    round: r,
                    phase: 2,
                    actor: contract.name().to_string(),
                    kind,
                    action: action.to_string(),
                    payload: msg.payload.iter().map(Value::to_string).collect(),
                    state: state_text,
                });
            }
        }
    }

    fn phase_read(&mut self, state: &mut RoundState) {
        let r = state.round;
        let learn = |trace: &mut Vec<TraceEvent>, party: &str, source: String, v: Value| {
            trace.push(TraceEvent {
                round: r,
                phase: 3,
                actor: party.to_string(),
                kind: EventKind::Learn,
                action: source,
                payload: vec![v.to_string()],
                state: String::new(),
            })
        };
        for p in 0..self.names.len() {
            for (contract, cs) in self.system.contracts.iter().zip(&state.contract_states) {
                for v in contract.published(cs) {
                    for new in state.knowledge[p].absorb(v) {
                        learn(&mut state.trace, &self.names[p], contract.name().to_string(), new);
                    }
                }
            }
        }
        for (from, to, v) in std::mem::take(&mut state.disclosures) {
            for new in state.knowledge[to.0].absorb(&v) {
                learn(&mut state.trace, &self.names[to.0], format!("from:{}", self.names[from.0]), new);
            }
        }
        for coalition in &self.binding.coalitions {
            let mut pool = KnowledgeSet::new();
            for p in coalition {
                pool.absorb_all(&state.knowledge[p.0]);
            }
            for p in coalition {
                for new in state.knowledge[p.0].absorb_all(&pool) {
                    learn(&mut state.trace, &self.names[p.0], "coalition".into(), new);
                }
            }
        }
    }

    fn phase_decide(&mut self, state: &mut RoundState) -> Result<(), SimError> {
        let r = state.round;
        for p in 0..self.names.len() {
            let party = PartyId(p);
            let mut local = std::mem::take(&mut state.locals[p]);
            let decision = {
                let view = self.view(state, party);
                self.binding.strategies[p].decide(&view, &mut local)
            };
            state.locals[p] = local;
            let knowledge = &state.knowledge[p];
            let violation = |value: &Value| SimError::KnowledgeViolation {
                round: r,
                party: self.names[p].clone(),
                value: value.clone(),
            };
            for out in &decision.sends {
                let contract = self.system.contracts.get(out.contract.0).ok_or(SimError::UnknownContract {
                    round: r,
                    party: self.names[p].clone(),
                    contract: out.contract.0,
                })?;
                if let Some(v) = out.payload.iter().find(|v| !knowledge.can_produce(v)) {
                    return Err(violation(v));
                }
                state.trace.push(TraceEvent {
                    round: r,
                    phase: 4,
                    actor: self.names[p].clone(),
                    kind: EventKind::Stage,
                    action: call_action(&self.names[p], &out.function, contract.name()).to_string(),
                    payload: out.payload.iter().map(Value::to_string).collect(),
                    state: String::new(),
                });
            }
            for (to, v) in &decision.disclosures {
                if !knowledge.can_produce(v) {
                    return Err(violation(v));
                }
                state.trace.push(TraceEvent {
                    round: r,
                    phase: 4,
                    actor: self.names[p].clone(),
                    kind: EventKind::Disclose,
                    action: "disclose".into(),
                    payload: vec![v.to_string()],
                    state: self.names.get(to.0).cloned().unwrap_or_default(),
                });
                state.disclosures.push((party, *to, v.clone()));
            }
            state.staged[p].extend(decision.sends);
        }
        Ok(())
    }

    /// Nothing in transit, no timer armed, and every strategy idle.
    pub fn is_quiescent(&self, state: &RoundState) -> bool {
        state.in_flight.is_empty()
            && state.staged.iter().all(Vec::is_empty)
            && state.disclosures.is_empty()
            && self
                .system
                .contracts
                .iter()
                .zip(&state.contract_states)
                .all(|(c, s)| !c.has_pending_timer(s))
            && (0..self.names.len()).all(|p| {
                let view = self.view(state, PartyId(p));
                self.binding.strategies[p].is_idle(&view, &state.locals[p])
            })
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub outcome: ContractStateVector,
    pub trace: Vec<TraceEvent>,
    pub initial_phases: Vec<String>,
    pub final_state: RoundState,
    pub choices: Vec<(usize, usize)>,
}

/// Runs rounds `0..horizon`, stopping early at quiescence.
pub fn run_execution(
    system: &System,
    binding: &Binding,
    schedule: &Schedule,
    inputs: &ContractStateVector,
    horizon: u64,
) -> Result<Execution, SimError> {
    let mut state = RoundState::initial(system, inputs)?;
    let initial_phases = state.phases(system);
    let mut sim = Simulation::new(system, binding, schedule)?;
    while state.round < horizon {
        sim.run_round(&mut state)?;
        if sim.is_quiescent(&state) {
            break;
        }
    }
    let choices = sim.chooser.made.clone();
    Ok(Execution {
        outcome: state.outcome(system),
        trace: state.trace.clone(),
        initial_phases,
        final_state: state,
        choices,
    })
}

/// Runs every schedule reachable under `policy` and `exhaustive_order`,
/// in depth-first choice order.
pub fn for_each_schedule(
    system: &System,
    binding: &Binding,
    policy: DeliveryPolicy,
    exhaustive_order: bool,
    inputs: &ContractStateVector,
    horizon: u64,
    mut f: impl FnMut(&Schedule, Execution),
) -> Result<(), SimError> {
    let mut schedule = Schedule {
        policy,
        exhaustive_order,
        choices: Vec::new(),
    };
    loop {
        let exec = run_execution(system, binding, &schedule, inputs, horizon)?;
        schedule.choices = exec.choices.iter().map(|(c, _)| *c).collect();
        let next = next_choices(&exec.choices);
        f(&schedule, exec);
        match next {
            Some(n) => schedule.choices = n,
            None => return Ok(()),
        }
    }
}

/// Projects the accepted contract steps of a trace onto the product of
/// `components` (parties first, then contracts). Each component advances
/// along its first matching step; a component that owns the action but has
/// no such step stays put, which `validate_fragment` then reports.
pub fn project_fragment(components: &[InterfaceAutomaton], initial: Vec<StateId>, trace: &[TraceEvent]) -> ExecutionFragment {
    let mut current = initial;
    let flatten = |parts: &[StateId]| StateId::tuple(parts.iter().flat_map(|s| s.components().iter().cloned()).collect());
    let mut fragment = ExecutionFragment::start(flatten(&current));
    for e in trace.iter().filter(|e| matches!(e.kind, EventKind::Step | EventKind::Timeout)) {
        let action = ActionId::new(e.action.as_str());
        for (i, a) in components.iter().enumerate() {
            if a.has_action(&action) {
                let next = a.successors(&current[i], &action).next().cloned();
                if let Some(next) = next {
                    current[i] = next;
                }
            }
        }
        fragment.push(action, flatten(&current));
    }
    fragment
}

/// Party names whose knowledge contains `value` at any point, from the
/// learn events of a trace together with initial knowledge.
pub fn holders_of(system: &System, trace: &[TraceEvent], value: &Value) -> BTreeSet<String> {
    let text = value.to_string();
    let mut holders: BTreeSet<String> = system
        .parties
        .iter()
        .filter(|p| KnowledgeSet::from_values(&p.knowledge).contains(value))
        .map(|p| p.name.clone())
        .collect();
    holders.extend(
        trace
            .iter()
            .filter(|e| e.kind == EventKind::Learn && e.payload.contains(&text))
            .map(|e| e.actor.clone()),
    );
    holders
}
