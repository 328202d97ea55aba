//! Two-party atomic swap over hashed-timelock contracts.
//!
//! Alice escrows `a` on `C_A` locked to `hash:s`, Bob copies the hashkey into
//! an escrow of `b` on `C_B` with a shorter timeout, Alice claims `b` by
//! revealing `s`, and Bob uses the revealed `s` to claim `a`.
//!
//! Timeouts are counted in steps of `delta + 1` rounds: a call staged in
//! round `r` lands by round `r + 1 + delta`, so each protocol step costs at
//! most that much. `C_A` times out three steps after escrow and `C_B` one
//! step after, which leaves Bob a full step between learning `s` and
//! Alice's deadline.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::automata::{ActionId, InterfaceAutomaton, StateId, Step};
use crate::checker::{Protocol, StrategyCatalog};
use crate::contract::{call_action, ContractState, TimerFired};
use crate::scenario::{
    AutomatonDecl, CatalogDecl, CheckerDecl, ContractDecl, EntryDecl, PartyDecl, ProtocolDecl, RationalText,
    Scenario, ScenarioError, StrategyDecl, TaskDecl, UtilityRow,
};
use crate::strategy::{CallKey, Decision, LocalState, Mutation, Outgoing, Strategy, View};
use crate::task::{utility, Cell, ContractStateVector, CrossChainTask, InputPartyVector, Utility};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("hashkey {0} is not a hash value")]
pub struct HashKeyError(pub Value);

/// `H(candidate) == hashkey`, symbolically: only the preimage matches.
pub fn hash_match(candidate: &Value, hashkey: &Value) -> Result<bool, HashKeyError> {
    match hashkey {
        Value::HashOf(h) => Ok(matches!(candidate, Value::Secret(s) if s == h)),
        other => Err(HashKeyError(other.clone())),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HtlcPhase {
    #[default]
    Unescrowed,
    Escrowed,
    Claimed,
    Refunded,
}

impl fmt::Display for HtlcPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HtlcPhase::Unescrowed => "Unescrowed",
            HtlcPhase::Escrowed => "Escrowed",
            HtlcPhase::Claimed => "Claimed",
            HtlcPhase::Refunded => "Refunded",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HtlcState {
    pub phase: HtlcPhase,
    pub hashkey: Option<Value>,
    pub deadline: Option<u64>,
    pub published: Vec<Value>,
}

/// Escrow of `asset` from `owner`, released to `beneficiary` on a matching
/// preimage no later than the deadline round, refunded in the first round
/// after it. With `refund` off the timeout never fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtlcContract {
    pub name: String,
    pub asset: String,
    pub owner: String,
    pub beneficiary: String,
    pub refund: bool,
}

impl HtlcContract {
    pub fn owner_label(&self) -> String {
        format!("{}↪{}", self.asset, self.owner)
    }

    pub fn beneficiary_label(&self) -> String {
        format!("{}↪{}", self.asset, self.beneficiary)
    }

    pub fn escrow_label(&self) -> String {
        format!("{}↪{}", self.asset, self.name)
    }

    pub fn outcome_label(&self, state: &HtlcState) -> String {
        match state.phase {
            HtlcPhase::Unescrowed | HtlcPhase::Refunded => self.owner_label(),
            HtlcPhase::Escrowed => self.escrow_label(),
            HtlcPhase::Claimed => self.beneficiary_label(),
        }
    }

    pub fn refund_action(&self) -> ActionId {
        ActionId::new(format!("{}.refund", self.name))
    }

    pub(crate) fn apply_call(
        &self,
        s: &mut HtlcState,
        sender: &str,
        function: &str,
        payload: &[Value],
        round: u64,
    ) -> Result<(), String> {
        match function {
            "escrow" => {
                if s.phase != HtlcPhase::Unescrowed || sender != self.owner {
                    return Err(format!("escrow not enabled for {sender} in {}", s.phase));
                }
                let [token, hashkey, timeout] = payload else {
                    return Err("escrow expects (token, hashkey, timeout)".into());
                };
                if token != &Value::token(&self.asset) {
                    return Err(format!("escrowed {token}, expected token:{}", self.asset));
                }
                if !matches!(hashkey, Value::HashOf(_)) {
                    return Err(format!("{hashkey} is not a hashkey"));
                }
                let timeout = timeout.as_plain_u64().ok_or("timeout is not a round count")?;
                s.phase = HtlcPhase::Escrowed;
                s.hashkey = Some(hashkey.clone());
                s.deadline = Some(round + timeout);
                s.published.push(hashkey.clone());
                Ok(())
            }
            "claim" => {
                if s.phase != HtlcPhase::Escrowed || sender != self.beneficiary {
                    return Err(format!("claim not enabled for {sender} in {}", s.phase));
                }
                let [candidate] = payload else {
                    return Err("claim expects one secret".into());
                };
                let (Some(hashkey), Some(deadline)) = (&s.hashkey, s.deadline) else {
                    return Err("escrow has no hashkey".into());
                };
                if round > deadline {
                    return Err(format!("deadline {deadline} has passed"));
                }
                if !hash_match(candidate, hashkey).map_err(|e| e.to_string())? {
                    return Err(format!("{candidate} does not match {hashkey}"));
                }
                s.phase = HtlcPhase::Claimed;
                if !s.published.contains(candidate) {
                    s.published.push(candidate.clone());
                }
                Ok(())
            }
            other => Err(format!("unknown function {other}")),
        }
    }

    pub(crate) fn fire_timer(&self, s: &mut HtlcState, round: u64) -> Option<TimerFired> {
        let deadline = s.deadline?;
        if !self.has_pending_timer(s) || round <= deadline {
            return None;
        }
        s.phase = HtlcPhase::Refunded;
        Some(TimerFired {
            action: self.refund_action(),
            deadline,
        })
    }

    pub(crate) fn has_pending_timer(&self, s: &HtlcState) -> bool {
        self.refund && s.phase == HtlcPhase::Escrowed
    }

    /// Inputs are every party's escrow and claim calls; the refund timeout
    /// is the only internal action.
    pub fn automaton(&self, parties: &[String]) -> InterfaceAutomaton {
        let inputs: Vec<ActionId> = parties
            .iter()
            .flat_map(|p| ["escrow", "claim"].map(|f| call_action(p, f, &self.name)))
            .collect();
        let phases = [
            HtlcPhase::Unescrowed,
            HtlcPhase::Escrowed,
            HtlcPhase::Claimed,
            HtlcPhase::Refunded,
        ];
        let st = |p: HtlcPhase| StateId::atom(p.to_string());
        let mut steps = vec![
            Step::new(
                st(HtlcPhase::Unescrowed),
                call_action(&self.owner, "escrow", &self.name),
                st(HtlcPhase::Escrowed),
            ),
            Step::new(
                st(HtlcPhase::Escrowed),
                call_action(&self.beneficiary, "claim", &self.name),
                st(HtlcPhase::Claimed),
            ),
        ];
        let mut internal = Vec::new();
        if self.refund {
            internal.push(self.refund_action());
            steps.push(Step::new(st(HtlcPhase::Escrowed), self.refund_action(), st(HtlcPhase::Refunded)));
        }
        InterfaceAutomaton::new(
            self.name.as_str(),
            phases.map(st),
            [st(HtlcPhase::Unescrowed)],
            inputs,
            [],
            internal,
            steps,
        )
        .expect("htlc automaton is well formed")
    }
}

fn htlc_state<'a>(view: &'a View<'_>, contract: &str) -> Option<(&'a HtlcContract, &'a HtlcState)> {
    let id = view.contract_index(contract)?;
    match (&view.contracts[id.0], &view.states[id.0]) {
        (crate::contract::Contract::Htlc(c), ContractState::Htlc(s)) => Some((c, s)),
        _ => None,
    }
}

/// The party that picks the secret and escrows first.
#[derive(Debug, Clone)]
pub struct Initiator {
    pub name: String,
    pub own: String,
    pub counter: String,
    pub secret: String,
    pub timeout_steps: u64,
}

impl Strategy for Initiator {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, view: &View<'_>, local: &mut LocalState) -> Decision {
        let mut d = Decision::default();
        if local.flag("done") {
            return d;
        }
        let step = view.delta + 1;
        let r = view.round;
        let (Some((own_c, own_s)), Some(own_id)) = (htlc_state(view, &self.own), view.contract_index(&self.own)) else {
            local.set("done", "no-contract");
            return d;
        };

        let Some(sent) = local.get_u64("escrow_staged") else {
            d.sends.push(Outgoing {
                contract: own_id,
                function: "escrow".into(),
                payload: vec![
                    Value::token(&own_c.asset),
                    Value::hash_of(&self.secret),
                    Value::plain(self.timeout_steps * step),
                ],
            });
            local.set("escrow_staged", r);
            return d;
        };

        let escrowed_at = match local.get_u64("escrowed_at") {
            Some(e) => e,
            None if own_s.phase == HtlcPhase::Escrowed => {
                local.set("escrowed_at", r);
                r
            }
            None => {
                if r > sent + 1 + view.delta {
                    local.set("done", "escrow-missing");
                }
                return d;
            }
        };

        let Some((counter_c, counter_s)) = htlc_state(view, &self.counter) else {
            local.set("done", "no-counter");
            return d;
        };
        match counter_s.phase {
            HtlcPhase::Escrowed => {
                let acceptable = counter_c.beneficiary == view.party_name()
                    && counter_c.asset != own_c.asset
                    && counter_s.hashkey.as_ref() == Some(&Value::hash_of(&self.secret))
                    && counter_s.deadline.is_some_and(|dl| dl >= r + step);
                if acceptable {
                    d.sends.push(Outgoing {
                        contract: view.contract_index(&self.counter).expect("counter exists"),
                        function: "claim".into(),
                        payload: vec![Value::secret(&self.secret)],
                    });
                    local.set("done", "claimed");
                } else {
                    local.set("done", "counter-escrow-rejected");
                }
            }
            HtlcPhase::Unescrowed if r <= escrowed_at + 1 + view.delta => {}
            _ => local.set("done", "counter-escrow-missing"),
        }
        d
    }

    fn is_idle(&self, _: &View<'_>, local: &LocalState) -> bool {
        local.flag("done")
    }
}

/// The party that mirrors the initiator's escrow and claims with the
/// secret once it is revealed.
#[derive(Debug, Clone)]
pub struct Responder {
    pub name: String,
    pub own: String,
    pub counter: String,
    pub timeout_steps: u64,
    /// Steps of slack required on the counter escrow before mirroring it.
    pub counter_steps: u64,
}

impl Strategy for Responder {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, view: &View<'_>, local: &mut LocalState) -> Decision {
        let mut d = Decision::default();
        if local.flag("done") {
            return d;
        }
        let step = view.delta + 1;
        let r = view.round;
        let (Some((own_c, _)), Some(own_id), Some((counter_c, counter_s)), Some(counter_id)) = (
            htlc_state(view, &self.own),
            view.contract_index(&self.own),
            htlc_state(view, &self.counter),
            view.contract_index(&self.counter),
        ) else {
            local.set("done", "no-contract");
            return d;
        };

        if !local.flag("escrow_staged") {
            match counter_s.phase {
                HtlcPhase::Escrowed => {
                    let hashkey = counter_s.hashkey.clone().filter(|h| matches!(h, Value::HashOf(_)));
                    let acceptable = counter_c.beneficiary == view.party_name()
                        && counter_c.asset != own_c.asset
                        && counter_s.deadline.is_some_and(|dl| dl >= r + self.counter_steps * step);
                    match hashkey {
                        Some(h) if acceptable => {
                            d.sends.push(Outgoing {
                                contract: own_id,
                                function: "escrow".into(),
                                payload: vec![Value::token(&own_c.asset), h, Value::plain(self.timeout_steps * step)],
                            });
                            local.set("escrow_staged", r);
                        }
                        _ => local.set("done", "counter-escrow-rejected"),
                    }
                }
                HtlcPhase::Unescrowed if r <= 1 + view.delta => {}
                _ => local.set("done", "counter-escrow-missing"),
            }
            return d;
        }

        if counter_s.phase != HtlcPhase::Escrowed || counter_s.deadline.is_some_and(|dl| r > dl) {
            local.set("done", "counter-resolved");
            return d;
        }
        let hashkey = counter_s.hashkey.as_ref().expect("escrowed contracts carry a hashkey");
        let preimage = view
            .knowledge
            .secrets()
            .map(Value::secret)
            .find(|s| hash_match(s, hashkey).unwrap_or(false));
        if let Some(secret) = preimage {
            d.sends.push(Outgoing {
                contract: counter_id,
                function: "claim".into(),
                payload: vec![secret],
            });
            local.set("done", "claimed");
        }
        d
    }

    fn is_idle(&self, _: &View<'_>, local: &LocalState) -> bool {
        local.flag("done")
    }
}

/// Alice's utility for a final ownership of `a` and `b`; Bob's is the mirror
/// image. Owning only the asset one started with is neutral, owning the
/// other party's asset is the goal, owning both is better still.
pub fn swap_utility(a_owner: &str, b_owner: &str, party: &str) -> Utility {
    let (mine, theirs) = if party == "A" { ("a", "b") } else { ("b", "a") };
    let owns = |asset: &str| {
        let owner = if asset == "a" { a_owner } else { b_owner };
        i64::from(owner == party)
    };
    utility(owns(mine) + 2 * owns(theirs) - 1)
}

fn owner_of(label: &str) -> &str {
    label.split_once('↪').map_or(label, |(_, o)| o)
}

/// Output vectors in the order of Alice's preference: both assets, the
/// swap, the status quo, neither.
pub const SWAP_OUTPUTS: [[&str; 2]; 4] = [["a↪A", "b↪A"], ["a↪B", "b↪A"], ["a↪A", "b↪B"], ["a↪B", "b↪B"]];

pub fn build_swap_task() -> CrossChainTask {
    swap_task_with(&SWAP_OUTPUTS.map(|o| o.map(String::from)).to_vec())
}

fn swap_task_with(outputs: &[[String; 2]]) -> CrossChainTask {
    let table: BTreeMap<Cell, Vec<Utility>> = outputs
        .iter()
        .enumerate()
        .map(|(i, [a, b])| {
            let row = ["A", "B"].map(|p| swap_utility(owner_of(a), owner_of(b), p)).to_vec();
            (Cell::new(0, 0, i), row)
        })
        .collect();
    CrossChainTask::new(
        vec!["A".into(), "B".into()],
        vec!["C_A".into(), "C_B".into()],
        vec![InputPartyVector(vec!["(B,a,b)".into(), "(A,b,a)".into()])],
        vec![ContractStateVector::new(["a↪A", "b↪B"])],
        outputs.iter().map(|o| ContractStateVector(o.to_vec())).collect(),
        table,
    )
    .expect("swap task is well formed")
}

/// Knobs for building swap variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapParams {
    pub delta: u64,
    pub initiator_timeout_steps: u64,
    pub responder_timeout_steps: u64,
    pub responder_counter_steps: u64,
    pub refund_a: bool,
    pub refund_b: bool,
    /// Adds delay and replay mutations to the generated catalog.
    pub timing_mutations: bool,
}

impl Default for SwapParams {
    fn default() -> Self {
        SwapParams {
            delta: 1,
            initiator_timeout_steps: 3,
            responder_timeout_steps: 1,
            responder_counter_steps: 3,
            refund_a: true,
            refund_b: true,
            timing_mutations: false,
        }
    }
}

fn automaton_decl(states: &[&str], outputs: &[&str], steps: &[[&str; 3]]) -> AutomatonDecl {
    AutomatonDecl {
        states: states.iter().map(|s| s.to_string()).collect(),
        initial: vec![states[0].to_string()],
        inputs: vec![],
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        internal: vec![],
        steps: steps.iter().map(|s| s.map(String::from)).collect(),
    }
}

fn withhold(call: &str) -> Option<Mutation> {
    Some(Mutation::Withhold {
        call: call.parse::<CallKey>().expect("static call key"),
    })
}

/// The swap as a scenario document, so that the built-in and the shipped
/// file go through the same compilation path.
pub fn swap_scenario(params: &SwapParams) -> Scenario {
    let mut outputs: Vec<[String; 2]> = SWAP_OUTPUTS.map(|o| o.map(String::from)).to_vec();
    if !params.refund_a {
        outputs.push(["a↪C_A".into(), "b↪A".into()]);
        outputs.push(["a↪C_A".into(), "b↪B".into()]);
    }
    if !params.refund_b {
        outputs.push(["a↪A".into(), "b↪C_B".into()]);
        outputs.push(["a↪B".into(), "b↪C_B".into()]);
    }
    if !params.refund_a && !params.refund_b {
        outputs.push(["a↪C_A".into(), "b↪C_B".into()]);
    }
    let task = swap_task_with(&outputs);

    let entry = |name: &str, party: &str, call: &str| EntryDecl {
        name: name.into(),
        party: party.into(),
        strategy: None,
        mutation: withhold(call),
    };
    let party = |name: &str, display: &str, knowledge: &[Value], automaton| PartyDecl {
        name: name.into(),
        display: Some(display.into()),
        knowledge: knowledge.to_vec(),
        automaton: Some(automaton),
    };

    Scenario {
        name: "swap".into(),
        description: "Two-party atomic swap of asset a (Alice) for asset b (Bob) over hashed-timelock contracts".into(),
        parties: vec![
            party(
                "A",
                "Alice",
                &[Value::token("a"), Value::token("b"), Value::secret("s"), Value::secret("decoy-A")],
                automaton_decl(
                    &["a0", "a1", "a2"],
                    &["A.escrow.C_A", "A.claim.C_B"],
                    &[["a0", "A.escrow.C_A", "a1"], ["a1", "A.claim.C_B", "a2"]],
                ),
            ),
            party(
                "B",
                "Bob",
                &[Value::token("a"), Value::token("b"), Value::secret("decoy-B")],
                automaton_decl(
                    &["b0", "b1", "b2"],
                    &["B.escrow.C_B", "B.claim.C_A"],
                    &[["b0", "B.escrow.C_B", "b1"], ["b1", "B.claim.C_A", "b2"]],
                ),
            ),
        ],
        contracts: vec![
            ContractDecl::Htlc {
                name: "C_A".into(),
                asset: "a".into(),
                owner: "A".into(),
                beneficiary: "B".into(),
                refund: params.refund_a,
            },
            ContractDecl::Htlc {
                name: "C_B".into(),
                asset: "b".into(),
                owner: "B".into(),
                beneficiary: "A".into(),
                refund: params.refund_b,
            },
        ],
        task: TaskDecl {
            party_inputs: task.party_inputs().iter().map(|v| v.0.clone()).collect(),
            contract_inputs: task.contract_inputs().iter().map(|v| v.0.clone()).collect(),
            outputs: task.outputs().iter().map(|v| v.0.clone()).collect(),
            utility: task
                .utility_table()
                .iter()
                .map(|(cell, row)| UtilityRow {
                    cell: [cell.party_inputs, cell.contract_inputs, cell.outputs],
                    values: row.iter().cloned().map(RationalText).collect(),
                })
                .collect(),
        },
        strategies: vec![
            StrategyDecl::HtlcInitiator {
                name: "initiator".into(),
                own: "C_A".into(),
                counter: "C_B".into(),
                secret: "s".into(),
                timeout_steps: params.initiator_timeout_steps,
            },
            StrategyDecl::HtlcResponder {
                name: "responder".into(),
                own: "C_B".into(),
                counter: "C_A".into(),
                timeout_steps: params.responder_timeout_steps,
                counter_steps: params.responder_counter_steps,
            },
        ],
        protocol: ProtocolDecl {
            compliant: [("A".to_string(), "initiator".to_string()), ("B".to_string(), "responder".to_string())].into(),
            horizon: None,
        },
        catalog: CatalogDecl {
            generate: true,
            timing: params.timing_mutations,
            entry: vec![
                entry("no-escrow", "A", "escrow@C_A"),
                entry("no-claim", "A", "claim@C_B"),
                EntryDecl {
                    name: "reveal-secret".into(),
                    party: "A".into(),
                    strategy: None,
                    mutation: Some(Mutation::Divert {
                        call: "claim@C_B".parse().expect("static call key"),
                    }),
                },
                entry("no-escrow", "B", "escrow@C_B"),
                entry("no-claim", "B", "claim@C_A"),
            ],
            joint: vec![],
        },
        checker: CheckerDecl {
            delta: params.delta,
            ..CheckerDecl::default()
        },
    }
}

/// The built-in swap with its default catalog.
pub fn build_swap_protocol() -> (Protocol, StrategyCatalog) {
    build_swap_protocol_with(&SwapParams::default()).expect("built-in swap compiles")
}

pub fn build_swap_protocol_with(params: &SwapParams) -> Result<(Protocol, StrategyCatalog), ScenarioError> {
    swap_scenario(params).compile()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{Classification, PartyId};

    #[test]
    fn hash_match_is_preimage_only() {
        assert_eq!(hash_match(&Value::secret("s1"), &Value::hash_of("s1")), Ok(true));
        assert_eq!(hash_match(&Value::secret("s2"), &Value::hash_of("s1")), Ok(false));
        assert_eq!(hash_match(&Value::hash_of("s1"), &Value::hash_of("s1")), Ok(false));
        assert_eq!(
            hash_match(&Value::secret("s1"), &Value::secret("s1")),
            Err(HashKeyError(Value::secret("s1")))
        );
    }

    #[test]
    fn task_matches_the_utility_tables() {
        let task = build_swap_task();
        assert_eq!(task.party_inputs().len(), 1);
        assert_eq!(task.contract_inputs().len(), 1);
        assert_eq!(task.outputs().len(), 4);
        let alice: Vec<Utility> = (0..4)
            .map(|o| task.party_utility_at(Cell::new(0, 0, o), PartyId(0)).unwrap())
            .collect();
        assert_eq!(alice, [2, 1, 0, -1].map(utility).to_vec());
        let bob: Vec<Utility> = (0..4)
            .map(|o| task.party_utility_at(Cell::new(0, 0, o), PartyId(1)).unwrap())
            .collect();
        assert_eq!(bob, [-1, 1, 0, 2].map(utility).to_vec());
        assert_eq!(task.classify_cell(Cell::new(0, 0, 1)).unwrap(), Classification::Preferred);
    }

    fn htlc() -> HtlcContract {
        HtlcContract {
            name: "C_A".into(),
            asset: "a".into(),
            owner: "A".into(),
            beneficiary: "B".into(),
            refund: true,
        }
    }

    #[test]
    fn htlc_escrow_claim_refund() {
        let c = htlc();
        let mut s = HtlcState::default();
        let escrow = [Value::token("a"), Value::hash_of("s"), Value::plain(2)];
        assert!(c.apply_call(&mut s, "B", "escrow", &escrow, 1).is_err());
        assert!(c.apply_call(&mut s, "A", "escrow", &[Value::token("b"), Value::hash_of("s"), Value::plain(2)], 1).is_err());
        c.apply_call(&mut s, "A", "escrow", &escrow, 1).unwrap();
        assert_eq!((s.phase, s.deadline), (HtlcPhase::Escrowed, Some(3)));
        assert_eq!(s.published, vec![Value::hash_of("s")]);

        let mut late = s.clone();
        assert!(c.apply_call(&mut late, "B", "claim", &[Value::secret("s")], 4).is_err());
        assert_eq!(c.fire_timer(&mut late, 3), None);
        assert_eq!(c.fire_timer(&mut late, 4).map(|t| t.deadline), Some(3));
        assert_eq!(late.phase, HtlcPhase::Refunded);
        assert_eq!(c.outcome_label(&late), "a↪A");

        assert!(c.apply_call(&mut s, "B", "claim", &[Value::secret("x")], 3).is_err());
        assert!(c.apply_call(&mut s, "A", "claim", &[Value::secret("s")], 3).is_err());
        c.apply_call(&mut s, "B", "claim", &[Value::secret("s")], 3).unwrap();
        assert_eq!(c.outcome_label(&s), "a↪B");
        assert!(s.published.contains(&Value::secret("s")));
        assert!(!c.has_pending_timer(&s));
    }

    #[test]
    fn htlc_without_refund_never_times_out() {
        let c = HtlcContract { refund: false, ..htlc() };
        let mut s = HtlcState::default();
        c.apply_call(&mut s, "A", "escrow", &[Value::token("a"), Value::hash_of("s"), Value::plain(0)], 0).unwrap();
        assert_eq!(c.fire_timer(&mut s, 100), None);
        assert_eq!(c.outcome_label(&s), "a↪C_A");
        assert!(!c.automaton(&["A".into(), "B".into()]).internal().contains(&c.refund_action()));
    }

    #[test]
    fn htlc_escrowed_enables_claim_and_refund() {
        let a = htlc().automaton(&["A".into(), "B".into()]);
        let enabled = a.enabled_actions(&StateId::atom("Escrowed")).unwrap();
        assert_eq!(enabled, [ActionId::new("B.claim.C_A"), ActionId::new("C_A.refund")].into());
        assert!(a.is_deterministic());
    }
}
