//! Exhaustive computation of the execution function Ξ and the Safety,
//! Liveness and Coalition Nash Equilibrium checks built on it.
//!
//! Deviation is drawn from a finite catalog, so every verdict is relative to
//! that catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{ActionId, AutomatonError, InterfaceAutomaton, StateId, Step};
use crate::contract::split_call_action;
use crate::scheduler::{
    for_each_schedule, run_execution, Binding, DeliveryPolicy, Execution, Schedule, SimError, System,
};
use crate::strategy::{CallKey, Mutated, Mutation, StrategyRef};
use crate::task::{Cell, ContractStateVector, CrossChainTask, FeasibilityReport, PartyId, Utility};
use crate::trace::{EventKind, TraceEvent};
use crate::value::{KnowledgeSet, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckerOptions {
    pub policies: Vec<DeliveryPolicy>,
    /// Explore every processing order of same-round messages.
    pub exhaustive_order: bool,
}

impl Default for CheckerOptions {
    fn default() -> Self {
        CheckerOptions {
            policies: vec![DeliveryPolicy::Immediate, DeliveryPolicy::AdversarialMax],
            exhaustive_order: false,
        }
    }
}

/// A protocol for a task: the system it runs on, one compliant strategy
/// per party, and the horizon executions are cut at.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub name: String,
    pub task: CrossChainTask,
    pub system: System,
    pub compliant: Vec<StrategyRef>,
    /// Declared behaviour of compliant parties as automata; `None` means
    /// any sequence of the party's calls.
    pub party_automata: Vec<Option<InterfaceAutomaton>>,
    pub horizon: u64,
    pub options: CheckerOptions,
}

impl Protocol {
    pub fn compliant_binding(&self) -> Binding {
        Binding::solo(self.compliant.clone())
    }

    pub fn contract_inputs(&self, index: usize) -> &ContractStateVector {
        &self.task.contract_inputs()[index]
    }

    /// Single-state automaton that may perform any call of `party` on any
    /// contract.
    pub fn port_automaton(&self, party: PartyId) -> InterfaceAutomaton {
        let names = self.system.party_names();
        let name = &names[party.0];
        let calls: BTreeSet<ActionId> = self
            .system
            .contracts
            .iter()
            .flat_map(|c| c.automaton(&names).inputs().clone())
            .filter(|a| split_call_action(a).is_some_and(|(p, _, _)| p == name))
            .collect();
        InterfaceAutomaton::new(
            name.as_str(),
            [StateId::atom("any")],
            [StateId::atom("any")],
            [],
            calls.iter().cloned(),
            [],
            calls.iter().map(|a| Step::new("any", a.clone(), "any")),
        )
        .expect("port automaton is well formed")
    }

    /// Parties (declared automaton if compliant, port automaton otherwise)
    /// followed by contracts, in declaration order.
    pub fn components(&self, compliance: &BTreeSet<PartyId>) -> Vec<InterfaceAutomaton> {
        let names = self.system.party_names();
        let parties = (0..names.len()).map(PartyId).map(|p| match &self.party_automata[p.0] {
            Some(a) if compliance.contains(&p) => a.clone(),
            _ => self.port_automaton(p),
        });
        let contracts = self.system.contracts.iter().map(|c| c.automaton(&names));
        parties.chain(contracts).collect()
    }

    pub fn composed(&self, compliance: &BTreeSet<PartyId>) -> Result<InterfaceAutomaton, AutomatonError> {
        crate::automata::compose_all(&self.components(compliance))
    }

    /// Initial product-state components for an execution.
    pub fn initial_components(&self, compliance: &BTreeSet<PartyId>, exec: &Execution) -> Vec<StateId> {
        let comps = self.components(compliance);
        let m = self.system.parties.len();
        comps
            .iter()
            .take(m)
            .map(|a| a.initial_states().iter().next().cloned().expect("automata have an initial state"))
            .chain(exec.initial_phases.iter().map(|p| StateId::atom(p.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    /// One member for a single-party deviation, several for a joint one.
    pub members: Vec<(PartyId, StrategyRef)>,
    pub mutation: Option<Mutation>,
    pub generated: bool,
}

impl CatalogEntry {
    pub fn is_joint(&self) -> bool {
        self.members.len() > 1
    }

    /// Rounds this entry may push activity past the protocol horizon.
    pub fn slack(&self) -> u64 {
        match &self.mutation {
            Some(Mutation::Delay { rounds, .. }) => *rounds,
            Some(Mutation::Replay { .. }) => 1,
            _ => 0,
        }
    }

    pub fn parties(&self) -> BTreeSet<PartyId> {
        self.members.iter().map(|(p, _)| *p).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generation {
    /// Withhold, corrupt and divert every compliant call.
    pub payload: bool,
    /// Delay (1 up to the horizon) and replay every compliant call.
    pub timing: bool,
}

#[derive(Debug, Clone, Default)]
pub struct StrategyCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl StrategyCatalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `named` entries followed by mutations generated from the calls each
    /// party makes in the all-compliant executions. A generated mutation
    /// equal to a named one is skipped.
    pub fn generate(protocol: &Protocol, named: Vec<CatalogEntry>, generation: Generation) -> Result<Self, SimError> {
        let (joints, mut entries): (Vec<_>, Vec<_>) = named.into_iter().partition(CatalogEntry::is_joint);
        if generation.payload || generation.timing {
            let calls = observed_calls(protocol)?;
            for (p, party_calls) in calls.iter().enumerate() {
                let knowledge = KnowledgeSet::from_values(&protocol.system.parties[p].knowledge);
                for (call, payload) in party_calls {
                    let mut mutations = Vec::new();
                    if generation.payload {
                        mutations.push(Mutation::Withhold { call: call.clone() });
                        mutations.push(Mutation::Divert { call: call.clone() });
                        for (index, v) in payload.iter().enumerate() {
                            for replacement in corruptions(v, &knowledge) {
                                mutations.push(Mutation::Corrupt {
                                    call: call.clone(),
                                    index,
                                    replacement,
                                });
                            }
                        }
                    }
                    if generation.timing {
                        for rounds in 1..=protocol.horizon {
                            mutations.push(Mutation::Delay {
                                call: call.clone(),
                                rounds,
                            });
                        }
                        mutations.push(Mutation::Replay { call: call.clone() });
                    }
                    for m in mutations {
                        let exists = entries
                            .iter()
                            .any(|e| e.members[0].0 == PartyId(p) && e.mutation.as_ref() == Some(&m));
                        if exists {
                            continue;
                        }
                        let name = m.label();
                        let strategy: StrategyRef =
                            Arc::new(Mutated::new(name.clone(), protocol.compliant[p].clone(), m.clone()));
                        entries.push(CatalogEntry {
                            name,
                            members: vec![(PartyId(p), strategy)],
                            mutation: Some(m),
                            generated: true,
                        });
                    }
                }
            }
        }
        entries.extend(joints);
        Ok(StrategyCatalog { entries })
    }

    pub fn for_party(&self, party: PartyId) -> impl Iterator<Item = &CatalogEntry> {
        self.entries
            .iter()
            .filter(move |e| !e.is_joint() && e.members[0].0 == party)
    }

    pub fn joints(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.is_joint())
    }

    pub fn find(&self, party: PartyId, name: &str) -> Option<&CatalogEntry> {
        self.for_party(party).find(|e| e.name == name)
    }

    pub fn find_joint(&self, name: &str) -> Option<&CatalogEntry> {
        self.joints().find(|e| e.name == name)
    }

    /// Only the hand-written entries.
    pub fn named_only(&self) -> StrategyCatalog {
        StrategyCatalog {
            entries: self.entries.iter().filter(|e| !e.generated).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Distinct call sites of each party in the all-compliant executions, with
/// the payload of their first occurrence.
fn observed_calls(protocol: &Protocol) -> Result<Vec<Vec<(CallKey, Vec<Value>)>>, SimError> {
    let names = protocol.system.party_names();
    let mut calls: Vec<Vec<(CallKey, Vec<Value>)>> = vec![Vec::new(); names.len()];
    for inputs in protocol.task.contract_inputs() {
        let exec = run_execution(
            &protocol.system,
            &protocol.compliant_binding(),
            &Schedule::new(DeliveryPolicy::Immediate),
            inputs,
            protocol.horizon,
        )?;
        for e in exec.trace.iter().filter(|e| e.kind == EventKind::Stage) {
            let action = ActionId::new(e.action.as_str());
            let Some((party, function, contract)) = split_call_action(&action) else { continue };
            let Some(p) = names.iter().position(|n| n == party) else { continue };
            let key = CallKey::new(function, contract);
            if calls[p].iter().any(|(k, _)| *k == key) {
                continue;
            }
            let payload = e.payload.iter().filter_map(|v| v.parse().ok()).collect();
            calls[p].push((key, payload));
        }
    }
    Ok(calls)
}

/// Plausible wrong values a party could put in place of `v`.
fn corruptions(v: &Value, knowledge: &KnowledgeSet) -> Vec<Value> {
    let other_secret = |x: &str| knowledge.secrets().find(|s| *s != x).map(str::to_string);
    match v {
        Value::Secret(x) => other_secret(x)
            .map(Value::Secret)
            .into_iter()
            .chain([Value::HashOf(x.clone())])
            .collect(),
        Value::HashOf(x) => other_secret(x).map(Value::HashOf).into_iter().collect(),
        Value::Plain(n) if n != "0" => vec![Value::plain(0)],
        Value::Token(t) => knowledge
            .tokens()
            .find(|u| u != t)
            .map(|u| vec![Value::token(u)])
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("execution ended in {outcome}, which is not a declared output vector (witness: {witness})")]
    ModelMismatch {
        outcome: ContractStateVector,
        witness: Box<Witness>,
    },
    #[error("unknown party `{0}`")]
    UnknownParty(String),
    #[error("no catalog entry `{strategy}` for party `{party}`")]
    UnknownStrategy { party: String, strategy: String },
    #[error("strategy assignment for compliance set {{{compliance}}}: {reason}")]
    BadAssignment { compliance: String, reason: String },
    #[error("cannot start a pool of {0} threads")]
    ThreadPool(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrategyChoice {
    pub party: String,
    pub strategy: String,
}

/// Everything needed to replay one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub contract_inputs: usize,
    pub compliance: Vec<String>,
    pub strategies: Vec<StrategyChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<String>,
    pub schedule: Schedule,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strategies: Vec<String> = self
            .strategies
            .iter()
            .map(|c| format!("{}={}", c.party, c.strategy))
            .collect();
        write!(f, "{} under {}", strategies.join(" "), self.schedule.policy.as_str())?;
        if let Some(j) = &self.joint {
            write!(f, " (joint {j})")?;
        }
        if self.schedule.exhaustive_order {
            write!(f, " with ordering")?;
        }
        if !self.schedule.choices.is_empty() {
            let c: Vec<String> = self.schedule.choices.iter().map(usize::to_string).collect();
            write!(f, " choices [{}]", c.join(","))?;
        }
        Ok(())
    }
}

pub const COMPLIANT: &str = "compliant";

/// One way of binding the deviating parties: an entry per deviator, or one
/// joint entry covering all of them.
#[derive(Debug, Clone)]
enum Assignment {
    Each(Vec<(PartyId, usize)>),
    Joint(usize),
}

fn assignments(catalog: &StrategyCatalog, deviators: &BTreeSet<PartyId>) -> Vec<Assignment> {
    let mut out = Vec::new();
    let per_party: Vec<(PartyId, Vec<usize>)> = deviators
        .iter()
        .map(|p| {
            let idx = catalog
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.is_joint() && e.members[0].0 == *p)
                .map(|(i, _)| i)
                .collect();
            (*p, idx)
        })
        .collect();
    if per_party.iter().all(|(_, v)| !v.is_empty()) {
        let mut combos: Vec<Vec<(PartyId, usize)>> = vec![Vec::new()];
        for (p, options) in &per_party {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |&i| {
                        let mut c = prefix.clone();
                        c.push((*p, i));
                        c
                    })
                })
                .collect();
        }
        out.extend(combos.into_iter().map(Assignment::Each));
    }
    out.extend(
        catalog
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_joint() && &e.parties() == deviators)
            .map(|(i, _)| Assignment::Joint(i)),
    );
    out
}

/// Binding and run horizon for a set of catalog entries. Delayed sends
/// extend the horizon so that late calls still resolve.
fn bind_entries(protocol: &Protocol, entries: &[&CatalogEntry]) -> (Binding, u64) {
    let mut strategies = protocol.compliant.clone();
    let mut coalitions = Vec::new();
    let mut horizon = protocol.horizon;
    for entry in entries {
        for (p, s) in &entry.members {
            strategies[p.0] = s.clone();
        }
        if entry.is_joint() {
            coalitions.push(entry.members.iter().map(|(p, _)| *p).collect());
        }
        horizon += entry.slack();
    }
    (Binding { strategies, coalitions }, horizon)
}

fn binding_for(protocol: &Protocol, catalog: &StrategyCatalog, assignment: &Assignment) -> (Binding, u64) {
    let entries: Vec<&CatalogEntry> = match assignment {
        Assignment::Each(choices) => choices.iter().map(|(_, i)| &catalog.entries[*i]).collect(),
        Assignment::Joint(i) => vec![&catalog.entries[*i]],
    };
    bind_entries(protocol, &entries)
}

fn witness_for(
    protocol: &Protocol,
    catalog: &StrategyCatalog,
    contract_inputs: usize,
    compliance: &BTreeSet<PartyId>,
    assignment: &Assignment,
    schedule: &Schedule,
) -> Witness {
    let names = protocol.system.party_names();
    let mut strategies: Vec<StrategyChoice> = names
        .iter()
        .map(|n| StrategyChoice {
            party: n.clone(),
            strategy: COMPLIANT.into(),
        })
        .collect();
    let mut joint = None;
    match assignment {
        Assignment::Each(choices) => {
            for (p, i) in choices {
                strategies[p.0].strategy = catalog.entries[*i].name.clone();
            }
        }
        Assignment::Joint(i) => {
            let entry = &catalog.entries[*i];
            joint = Some(entry.name.clone());
            for (p, s) in &entry.members {
                strategies[p.0].strategy = s.name().to_string();
            }
        }
    }
    Witness {
        contract_inputs,
        compliance: compliance.iter().map(|p| names[p.0].clone()).collect(),
        strategies,
        joint,
        schedule: schedule.clone(),
    }
}

/// Non-empty subsets of the parties: the full set first, then by
/// decreasing size, then lexicographically.
pub fn compliance_sets(parties: usize) -> Vec<BTreeSet<PartyId>> {
    let mut sets: Vec<BTreeSet<PartyId>> = (1u64..(1 << parties))
        .map(|mask| (0..parties).filter(|i| mask & (1 << i) != 0).map(PartyId).collect())
        .collect();
    sets.sort_by(|a: &BTreeSet<PartyId>, b| b.len().cmp(&a.len()).then_with(|| a.iter().cmp(b.iter())));
    sets
}

/// Ξ for one contract input vector and one compliance set, with the
/// smallest witness for each outcome.
#[derive(Debug, Clone)]
pub struct XiTable {
    pub contract_inputs: usize,
    pub compliance: BTreeSet<PartyId>,
    /// Output-vector index to witness.
    pub outcomes: BTreeMap<usize, Witness>,
    pub executions: u64,
    /// Deviators the catalog offers nothing for.
    pub uncovered: Vec<PartyId>,
}

impl XiTable {
    pub fn outcome_set(&self, task: &CrossChainTask) -> BTreeSet<ContractStateVector> {
        self.outcomes.keys().map(|&o| task.outputs()[o].clone()).collect()
    }
}

type Key = (usize, usize, Vec<usize>);

struct JobResult {
    found: BTreeMap<usize, (Key, Witness)>,
    executions: u64,
}

fn run_job(
    protocol: &Protocol,
    catalog: &StrategyCatalog,
    contract_inputs: usize,
    compliance: &BTreeSet<PartyId>,
    index: usize,
    assignment: &Assignment,
) -> Result<JobResult, CheckError> {
    let (binding, horizon) = binding_for(protocol, catalog, assignment);
    let inputs = protocol.contract_inputs(contract_inputs);
    let mut found: BTreeMap<usize, (Key, Witness)> = BTreeMap::new();
    let mut executions = 0;
    let mut mismatch = None;
    for (pi, policy) in protocol.options.policies.iter().enumerate() {
        for_each_schedule(
            &protocol.system,
            &binding,
            *policy,
            protocol.options.exhaustive_order,
            inputs,
            horizon,
            |schedule, exec| {
                executions += 1;
                let witness = || witness_for(protocol, catalog, contract_inputs, compliance, assignment, schedule);
                let Some(o) = protocol.task.output_index(&exec.outcome) else {
                    mismatch.get_or_insert_with(|| CheckError::ModelMismatch {
                        outcome: exec.outcome.clone(),
                        witness: Box::new(witness()),
                    });
                    return;
                };
                let key = (index, pi, schedule.choices.clone());
                if found.get(&o).map_or(true, |(k, _)| key < *k) {
                    found.insert(o, (key, witness()));
                }
            },
        )?;
        if let Some(e) = mismatch {
            return Err(e);
        }
    }
    Ok(JobResult { found, executions })
}

/// Ξ for every contract input vector and every non-empty compliance set.
pub fn compute_all_xi(protocol: &Protocol, catalog: &StrategyCatalog) -> Result<Vec<XiTable>, CheckError> {
    let sets = compliance_sets(protocol.system.parties.len());
    let mut tables = Vec::new();
    let mut jobs = Vec::new();
    for ic in 0..protocol.task.contract_inputs().len() {
        for q in &sets {
            let deviators: BTreeSet<PartyId> = (0..protocol.system.parties.len())
                .map(PartyId)
                .filter(|p| !q.contains(p))
                .collect();
            let uncovered = deviators
                .iter()
                .copied()
                .filter(|p| catalog.for_party(*p).next().is_none())
                .collect();
            let table = tables.len();
            for (i, a) in assignments(catalog, &deviators).into_iter().enumerate() {
                jobs.push((table, i, a));
            }
            tables.push(XiTable {
                contract_inputs: ic,
                compliance: q.clone(),
                outcomes: BTreeMap::new(),
                executions: 0,
                uncovered,
            });
        }
    }

    let results: Vec<Result<JobResult, CheckError>> = jobs
        .par_iter()
        .map(|(t, i, a)| {
            let table = &tables[*t];
            run_job(protocol, catalog, table.contract_inputs, &table.compliance, *i, a)
        })
        .collect();

    let mut best: Vec<BTreeMap<usize, (Key, Witness)>> = vec![BTreeMap::new(); tables.len()];
    for ((t, _, _), result) in jobs.iter().zip(results) {
        let result = result?;
        tables[*t].executions += result.executions;
        for (o, (key, w)) in result.found {
            let slot = &mut best[*t];
            if slot.get(&o).map_or(true, |(k, _)| key < *k) {
                slot.insert(o, (key, w));
            }
        }
    }
    for (table, found) in tables.iter_mut().zip(best) {
        table.outcomes = found.into_iter().map(|(o, (_, w))| (o, w)).collect();
    }
    Ok(tables)
}

/// Ξ(I_C, Q): the output vectors reachable when exactly `compliance`
/// follows the protocol and everyone else plays any catalog entry.
pub fn compute_xi(
    protocol: &Protocol,
    catalog: &StrategyCatalog,
    contract_inputs: usize,
    compliance: &BTreeSet<PartyId>,
) -> Result<XiTable, CheckError> {
    let m = protocol.system.parties.len();
    if let Some(p) = compliance.iter().find(|p| p.0 >= m) {
        return Err(CheckError::UnknownParty(format!("#{}", p.0)));
    }
    let deviators: BTreeSet<PartyId> = (0..m).map(PartyId).filter(|p| !compliance.contains(p)).collect();
    let mut table = XiTable {
        contract_inputs,
        compliance: compliance.clone(),
        outcomes: BTreeMap::new(),
        executions: 0,
        uncovered: deviators
            .iter()
            .copied()
            .filter(|p| catalog.for_party(*p).next().is_none())
            .collect(),
    };
    let list = assignments(catalog, &deviators);
    let results: Vec<_> = list
        .par_iter()
        .enumerate()
        .map(|(i, a)| run_job(protocol, catalog, contract_inputs, compliance, i, a))
        .collect();
    let mut best: BTreeMap<usize, (Key, Witness)> = BTreeMap::new();
    for r in results {
        let r = r?;
        table.executions += r.executions;
        for (o, (key, w)) in r.found {
            if best.get(&o).map_or(true, |(k, _)| key < *k) {
                best.insert(o, (key, w));
            }
        }
    }
    table.outcomes = best.into_iter().map(|(o, (_, w))| (o, w)).collect();
    Ok(table)
}

/// Re-runs the execution a witness describes.
pub fn replay(protocol: &Protocol, catalog: &StrategyCatalog, witness: &Witness) -> Result<Execution, CheckError> {
    let entries: Vec<&CatalogEntry> = match &witness.joint {
        Some(j) => vec![catalog.find_joint(j).ok_or_else(|| CheckError::UnknownStrategy {
            party: "joint".into(),
            strategy: j.clone(),
        })?],
        None => {
            let mut entries = Vec::new();
            for choice in witness.strategies.iter().filter(|c| c.strategy != COMPLIANT) {
                let p = protocol
                    .system
                    .party_index(&choice.party)
                    .ok_or_else(|| CheckError::UnknownParty(choice.party.clone()))?;
                entries.push(catalog.find(p, &choice.strategy).ok_or_else(|| CheckError::UnknownStrategy {
                    party: choice.party.clone(),
                    strategy: choice.strategy.clone(),
                })?);
            }
            entries
        }
    };
    let (binding, horizon) = bind_entries(protocol, &entries);
    Ok(run_execution(
        &protocol.system,
        &binding,
        &witness.schedule,
        protocol.contract_inputs(witness.contract_inputs),
        horizon,
    )?)
}

/// Binds `overrides` (party to catalog entry name) and leaves everyone else
/// compliant. Returns the binding and the horizon to run it for.
pub fn binding_with(
    protocol: &Protocol,
    catalog: &StrategyCatalog,
    overrides: &BTreeMap<PartyId, String>,
) -> Result<(Binding, u64), CheckError> {
    let names = protocol.system.party_names();
    let mut entries = Vec::new();
    for (p, name) in overrides.iter().filter(|(_, n)| *n != COMPLIANT) {
        entries.push(catalog.find(*p, name).ok_or_else(|| CheckError::UnknownStrategy {
            party: names[p.0].clone(),
            strategy: name.clone(),
        })?);
    }
    Ok(bind_entries(protocol, &entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Liveness,
    Safety,
    CoalitionNash,
}

impl Property {
    pub fn title(self) -> &'static str {
        match self {
            Property::Liveness => "Liveness",
            Property::Safety => "Safety",
            Property::CoalitionNash => "Coalition Nash Equilibrium",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub party_inputs: usize,
    pub reason: String,
    pub witness: Witness,
    pub outcome: ContractStateVector,
    pub utilities: Vec<Utility>,
    /// For Nash failures: the compliant outcome the deviation beats.
    pub baseline: Option<(ContractStateVector, Witness)>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub property: Property,
    pub pass: bool,
    /// No deviating execution was available to quantify over.
    pub vacuous: bool,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: String,
    pub task: CrossChainTask,
    /// Human-readable party names, parallel to the task's parties.
    pub displays: Vec<String>,
    pub delta: u64,
    pub horizon: u64,
    pub options: CheckerOptions,
    /// Catalog entries per party, then joint entries.
    pub catalog_sizes: Vec<usize>,
    pub joint_entries: usize,
    pub feasibility: FeasibilityReport,
    pub xi: Vec<XiTable>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn properties_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn passes(&self) -> bool {
        self.properties_pass() && self.feasibility.passes()
    }

    pub fn verdict(&self, property: Property) -> &Verdict {
        self.verdicts
            .iter()
            .find(|v| v.property == property)
            .expect("all three properties are checked")
    }

    pub fn table(&self, contract_inputs: usize, compliance: &BTreeSet<PartyId>) -> Option<&XiTable> {
        self.xi
            .iter()
            .find(|t| t.contract_inputs == contract_inputs && &t.compliance == compliance)
    }

    pub fn executions(&self) -> u64 {
        self.xi.iter().map(|t| t.executions).sum()
    }
}

struct Checks<'a> {
    protocol: &'a Protocol,
    catalog: &'a StrategyCatalog,
    xi: &'a [XiTable],
}

impl Checks<'_> {
    fn everyone(&self) -> BTreeSet<PartyId> {
        self.protocol.task.all_parties()
    }

    fn table(&self, ic: usize, q: &BTreeSet<PartyId>) -> &XiTable {
        self.xi
            .iter()
            .find(|t| t.contract_inputs == ic && &t.compliance == q)
            .expect("every compliance set has a table")
    }

    fn deviating_executions_exist(&self) -> bool {
        let all = self.everyone();
        self.xi.iter().any(|t| t.compliance != all && !t.outcomes.is_empty())
    }

    fn failure(&self, ip: usize, reason: String, outcome: usize, witness: &Witness) -> Failure {
        let task = &self.protocol.task;
        let cell = Cell::new(ip, witness.contract_inputs, outcome);
        let trace = replay(self.protocol, self.catalog, witness)
            .map(|e| e.trace)
            .unwrap_or_default();
        Failure {
            party_inputs: ip,
            reason,
            witness: witness.clone(),
            outcome: task.outputs()[outcome].clone(),
            utilities: task.utilities(cell).map(<[_]>::to_vec).unwrap_or_default(),
            baseline: None,
            trace,
        }
    }

    fn names(&self) -> Vec<String> {
        self.protocol.system.party_names()
    }

    fn liveness(&self) -> Verdict {
        let task = &self.protocol.task;
        let all = self.everyone();
        for ip in 0..task.party_inputs().len() {
            for ic in 0..task.contract_inputs().len() {
                for (&o, w) in &self.table(ic, &all).outcomes {
                    let row = task.utilities(Cell::new(ip, ic, o)).expect("total utility");
                    if let Some(p) = row.iter().position(|u| !u.is_positive()) {
                        let reason = format!(
                            "all-compliant outcome {} gives {} utility {}",
                            task.outputs()[o],
                            self.names()[p],
                            row[p]
                        );
                        return Verdict {
                            property: Property::Liveness,
                            pass: false,
                            vacuous: false,
                            failure: Some(self.failure(ip, reason, o, w)),
                        };
                    }
                }
            }
        }
        Verdict {
            property: Property::Liveness,
            pass: true,
            vacuous: false,
            failure: None,
        }
    }

    fn safety(&self) -> Verdict {
        let task = &self.protocol.task;
        for ip in 0..task.party_inputs().len() {
            for table in self.xi {
                for (&o, w) in &table.outcomes {
                    let row = task
                        .utilities(Cell::new(ip, table.contract_inputs, o))
                        .expect("total utility");
                    if let Some(p) = table.compliance.iter().find(|p| row[p.0].is_negative()) {
                        let reason = format!(
                            "compliant {} ends with utility {} in {}",
                            self.names()[p.0],
                            row[p.0],
                            task.outputs()[o]
                        );
                        return Verdict {
                            property: Property::Safety,
                            pass: false,
                            vacuous: false,
                            failure: Some(self.failure(ip, reason, o, w)),
                        };
                    }
                }
            }
        }
        Verdict {
            property: Property::Safety,
            pass: true,
            vacuous: !self.deviating_executions_exist(),
            failure: None,
        }
    }

    fn nash(&self) -> Verdict {
        let task = &self.protocol.task;
        let all = self.everyone();
        let names = self.names();
        for ip in 0..task.party_inputs().len() {
            for ic in 0..task.contract_inputs().len() {
                let compliant = self.table(ic, &all);
                for q in compliance_sets(all.len()).into_iter().filter(|q| *q != all) {
                    let coalition: BTreeSet<PartyId> = all.difference(&q).copied().collect();
                    let deviating = self.table(ic, &q);
                    for (&o, ow) in &compliant.outcomes {
                        let base = task.coalition_utility_at(Cell::new(ip, ic, o), &coalition).expect("total utility");
                        for (&d, dw) in &deviating.outcomes {
                            let gain =
                                task.coalition_utility_at(Cell::new(ip, ic, d), &coalition).expect("total utility");
                            if gain > base {
                                let members: Vec<&str> = coalition.iter().map(|p| names[p.0].as_str()).collect();
                                let reason = format!(
                                    "coalition {{{}}} gets {} by deviating ({}) but {} by complying ({})",
                                    members.join(","),
                                    gain,
                                    task.outputs()[d],
                                    base,
                                    task.outputs()[o]
                                );
                                let mut failure = self.failure(ip, reason, d, dw);
                                failure.baseline = Some((task.outputs()[o].clone(), ow.clone()));
                                return Verdict {
                                    property: Property::CoalitionNash,
                                    pass: false,
                                    vacuous: false,
                                    failure: Some(failure),
                                };
                            }
                        }
                    }
                }
            }
        }
        Verdict {
            property: Property::CoalitionNash,
            pass: true,
            vacuous: !self.deviating_executions_exist(),
            failure: None,
        }
    }
}

pub fn check_liveness(protocol: &Protocol, catalog: &StrategyCatalog) -> Result<Verdict, CheckError> {
    let xi = compute_all_xi(protocol, catalog)?;
    Ok(Checks { protocol, catalog, xi: &xi }.liveness())
}

pub fn check_safety(protocol: &Protocol, catalog: &StrategyCatalog) -> Result<Verdict, CheckError> {
    let xi = compute_all_xi(protocol, catalog)?;
    Ok(Checks { protocol, catalog, xi: &xi }.safety())
}

pub fn check_coalition_nash(protocol: &Protocol, catalog: &StrategyCatalog) -> Result<Verdict, CheckError> {
    let xi = compute_all_xi(protocol, catalog)?;
    Ok(Checks { protocol, catalog, xi: &xi }.nash())
}

/// Feasibility, every Ξ table and the three verdicts.
pub fn verify(protocol: &Protocol, catalog: &StrategyCatalog) -> Result<Report, CheckError> {
    let xi = compute_all_xi(protocol, catalog)?;
    let checks = Checks { protocol, catalog, xi: &xi };
    let verdicts = vec![checks.liveness(), checks.safety(), checks.nash()];

    let names = protocol.system.party_names();
    let all = protocol.task.all_parties();
    let mut notes = Vec::new();
    for t in xi.iter().filter(|t| t.compliance == all && t.outcomes.len() > 1) {
        notes.push(format!(
            "all-compliant executions from input vector {} reach {} outcomes; Nash compares every pair",
            t.contract_inputs,
            t.outcomes.len()
        ));
    }
    let mut uncovered: BTreeSet<PartyId> = BTreeSet::new();
    for t in &xi {
        uncovered.extend(t.uncovered.iter().copied());
    }
    for p in uncovered {
        notes.push(format!("catalog has no deviating strategy for {}", names[p.0]));
    }
    if verdicts.iter().any(|v| v.vacuous) {
        notes.push("no deviating executions: Safety and Coalition Nash hold vacuously".into());
    }

    Ok(Report {
        scenario: protocol.name.clone(),
        task: protocol.task.clone(),
        displays: protocol.system.parties.iter().map(|p| p.display.clone()).collect(),
        delta: protocol.system.delta,
        horizon: protocol.horizon,
        options: protocol.options.clone(),
        catalog_sizes: (0..names.len()).map(|p| catalog.for_party(PartyId(p)).count()).collect(),
        joint_entries: catalog.joints().count(),
        feasibility: protocol.task.check_feasibility(),
        xi,
        verdicts,
        notes,
    })
}

/// `verify` on a dedicated pool of `jobs` threads.
pub fn verify_with_jobs(protocol: &Protocol, catalog: &StrategyCatalog, jobs: usize) -> Result<Report, CheckError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|_| CheckError::ThreadPool(jobs))?;
    pool.install(|| verify(protocol, catalog))
}

/// Coalition utility helper used by reports: zero for the empty set.
pub fn coalition_total(task: &CrossChainTask, cell: Cell, coalition: &BTreeSet<PartyId>) -> Utility {
    task.coalition_utility_at(cell, coalition).unwrap_or_else(|_| Utility::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compliance_sets_order() {
        let sets = compliance_sets(3);
        assert_eq!(sets.len(), 7);
        assert_eq!(sets[0].len(), 3);
        let pairs: Vec<Vec<usize>> = sets[1..4].iter().map(|s| s.iter().map(|p| p.0).collect()).collect();
        assert_eq!(pairs, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(sets[6], [PartyId(2)].into());
    }

    #[test]
    fn corruption_candidates() {
        let k = KnowledgeSet::from_values(&[Value::secret("s"), Value::secret("d"), Value::token("a"), Value::token("b")]);
        assert_eq!(corruptions(&Value::secret("s"), &k), vec![Value::secret("d"), Value::hash_of("s")]);
        assert_eq!(corruptions(&Value::hash_of("s"), &k), vec![Value::hash_of("d")]);
        assert_eq!(corruptions(&Value::plain(6), &k), vec![Value::plain(0)]);
        assert!(corruptions(&Value::plain(0), &k).is_empty());
        assert_eq!(corruptions(&Value::token("a"), &k), vec![Value::token("b")]);
    }
}
