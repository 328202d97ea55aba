//! Party behaviour. A strategy is a deterministic function from what the
//! party can observe to the calls it stages for the next round.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::contract::{Contract, ContractState};
use crate::task::{ContractId, PartyId};
use crate::value::{KnowledgeSet, Value};

/// Everything a party may look at when deciding: the round, its own
/// knowledge, and the public state of every contract.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub round: u64,
    pub party: PartyId,
    pub delta: u64,
    pub parties: &'a [String],
    pub knowledge: &'a KnowledgeSet,
    pub contracts: &'a [Contract],
    pub states: &'a [ContractState],
}

impl View<'_> {
    pub fn contract_index(&self, name: &str) -> Option<ContractId> {
        self.contracts.iter().position(|c| c.name() == name).map(ContractId)
    }

    pub fn party_name(&self) -> &str {
        &self.parties[self.party.0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Outgoing {
    pub contract: ContractId,
    pub function: String,
    pub payload: Vec<Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decision {
    pub sends: Vec<Outgoing>,
    /// Off-chain disclosures over the hidden channel, delivered at the next
    /// round boundary.
    pub disclosures: Vec<(PartyId, Value)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalState {
    pub vars: BTreeMap<String, String>,
    pub held: Vec<(u64, Outgoing)>,
    pub inner: Option<Box<LocalState>>,
}

impl LocalState {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str)
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.vars.insert(key.to_string(), value.to_string());
    }

    pub fn flag(&self, key: &str) -> bool {
        self.vars.contains_key(key)
    }
}

pub trait Strategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn decide(&self, view: &View<'_>, local: &mut LocalState) -> Decision;

    /// True once the strategy will never send or disclose again.
    fn is_idle(&self, view: &View<'_>, local: &LocalState) -> bool;
}

pub type StrategyRef = Arc<dyn Strategy>;

/// Never acts.
#[derive(Debug, Clone)]
pub struct Idle {
    name: String,
}

impl Idle {
    pub fn new(name: impl Into<String>) -> Self {
        Idle { name: name.into() }
    }
}

impl Strategy for Idle {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, _: &View<'_>, _: &mut LocalState) -> Decision {
        Decision::default()
    }

    fn is_idle(&self, _: &View<'_>, _: &LocalState) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSend {
    pub round: u64,
    pub contract: ContractId,
    pub function: String,
    pub payload: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptDisclosure {
    pub round: u64,
    pub to: PartyId,
    pub value: Value,
}

/// Fixed schedule of calls, each staged in the party-local phase of its
/// round regardless of what the contracts look like.
#[derive(Debug, Clone)]
pub struct Script {
    name: String,
    sends: Vec<ScriptSend>,
    disclosures: Vec<ScriptDisclosure>,
}

impl Script {
    pub fn new(name: impl Into<String>, sends: Vec<ScriptSend>, disclosures: Vec<ScriptDisclosure>) -> Self {
        Script {
            name: name.into(),
            sends,
            disclosures,
        }
    }

    pub fn sends(&self) -> &[ScriptSend] {
        &self.sends
    }

    pub fn disclosures(&self) -> &[ScriptDisclosure] {
        &self.disclosures
    }

    fn last_round(&self) -> Option<u64> {
        let a = self.sends.iter().map(|s| s.round);
        let b = self.disclosures.iter().map(|d| d.round);
        a.chain(b).max()
    }
}

impl Strategy for Script {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, view: &View<'_>, _: &mut LocalState) -> Decision {
        Decision {
            sends: self
                .sends
                .iter()
                .filter(|s| s.round == view.round)
                .map(|s| Outgoing {
                    contract: s.contract,
                    function: s.function.clone(),
                    payload: s.payload.clone(),
                })
                .collect(),
            disclosures: self
                .disclosures
                .iter()
                .filter(|d| d.round == view.round)
                .map(|d| (d.to, d.value.clone()))
                .collect(),
        }
    }

    fn is_idle(&self, view: &View<'_>, _: &LocalState) -> bool {
        self.last_round().map_or(true, |r| view.round >= r)
    }
}

/// A call site `function@contract`, the unit that mutations act on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallKey {
    pub function: String,
    pub contract: String,
}

impl CallKey {
    pub fn new(function: impl Into<String>, contract: impl Into<String>) -> Self {
        CallKey {
            function: function.into(),
            contract: contract.into(),
        }
    }

    fn matches(&self, view: &View<'_>, out: &Outgoing) -> bool {
        out.function == self.function
            && view.contracts.get(out.contract.0).map(Contract::name) == Some(self.contract.as_str())
    }
}

impl fmt::Display for CallKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.function, self.contract)
    }
}

impl FromStr for CallKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('@') {
            Some((f, c)) if !f.is_empty() && !c.is_empty() => Ok(CallKey::new(f, c)),
            _ => Err(format!("call `{s}` is not of the form function@contract")),
        }
    }
}

impl Serialize for CallKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CallKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A systematic deviation applied to every matching call of a base
/// strategy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mutation {
    /// Never send the call.
    Withhold { call: CallKey },
    /// Send it with one payload element replaced.
    Corrupt {
        call: CallKey,
        index: usize,
        replacement: Value,
    },
    /// Do not send it; hand the payload to every other party off-chain.
    Divert { call: CallKey },
    /// Send it `rounds` rounds late.
    Delay { call: CallKey, rounds: u64 },
    /// Send it, then send it again one round later.
    Replay { call: CallKey },
}

impl Mutation {
    pub fn call(&self) -> &CallKey {
        match self {
            Mutation::Withhold { call }
            | Mutation::Corrupt { call, .. }
            | Mutation::Divert { call }
            | Mutation::Delay { call, .. }
            | Mutation::Replay { call } => call,
        }
    }

    pub fn is_timing(&self) -> bool {
        matches!(self, Mutation::Delay { .. } | Mutation::Replay { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Mutation::Withhold { call } => format!("withhold:{call}"),
            Mutation::Corrupt { call, index, replacement } => format!("corrupt:{call}[{index}]={replacement}"),
            Mutation::Divert { call } => format!("divert:{call}"),
            Mutation::Delay { call, rounds } => format!("delay+{rounds}:{call}"),
            Mutation::Replay { call } => format!("replay:{call}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mutated {
    name: String,
    base: StrategyRef,
    mutation: Mutation,
}

impl Mutated {
    pub fn new(name: impl Into<String>, base: StrategyRef, mutation: Mutation) -> Self {
        Mutated {
            name: name.into(),
            base,
            mutation,
        }
    }

    pub fn mutation(&self) -> &Mutation {
        &self.mutation
    }

    pub fn base(&self) -> &StrategyRef {
        &self.base
    }
}

impl Strategy for Mutated {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, view: &View<'_>, local: &mut LocalState) -> Decision {
        let inner = local.inner.get_or_insert_with(Default::default);
        let decision = self.base.decide(view, inner);

        let mut out = Decision {
            sends: Vec::new(),
            disclosures: decision.disclosures,
        };
        let (due, later): (Vec<_>, Vec<_>) = local.held.drain(..).partition(|(r, _)| *r <= view.round);
        local.held = later;
        out.sends.extend(due.into_iter().map(|(_, o)| o));

        for send in decision.sends {
            if !self.mutation.call().matches(view, &send) {
                out.sends.push(send);
                continue;
            }
            match &self.mutation {
                Mutation::Withhold { .. } => {}
                Mutation::Corrupt { index, replacement, .. } => {
                    let mut send = send;
                    if let Some(slot) = send.payload.get_mut(*index) {
                        *slot = replacement.clone();
                    }
                    out.sends.push(send);
                }
                Mutation::Divert { .. } => {
                    for p in (0..view.parties.len()).map(PartyId).filter(|p| *p != view.party) {
                        for v in &send.payload {
                            out.disclosures.push((p, v.clone()));
                        }
                    }
                }
                Mutation::Delay { rounds, .. } => local.held.push((view.round + rounds, send)),
                Mutation::Replay { .. } => {
                    local.held.push((view.round + 1, send.clone()));
                    out.sends.push(send);
                }
            }
        }
        out
    }

    fn is_idle(&self, view: &View<'_>, local: &LocalState) -> bool {
        let base_idle = match &local.inner {
            Some(inner) => self.base.is_idle(view, inner),
            None => self.base.is_idle(view, &LocalState::default()),
        };
        base_idle && local.held.is_empty()
    }
}
