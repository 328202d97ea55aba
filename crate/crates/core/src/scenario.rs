//! Scenario files: a TOML description of parties, contracts, the task,
//! strategies, the compliant protocol, the deviation catalog and checker
//! options. See `docs/scenario-format.md` for the grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::automata::{ActionId, InterfaceAutomaton, StateId, Step};
use crate::checker::{CatalogEntry, CheckerOptions, Generation, Protocol, StrategyCatalog};
use crate::contract::{split_call_action, Contract, TableContract, Timer};
use crate::scheduler::{DeliveryPolicy, PartyInfo, System};
use crate::strategy::{Idle, Mutated, Mutation, Script, ScriptDisclosure, ScriptSend, StrategyRef};
use crate::swap::{HtlcContract, Initiator, Responder};
use crate::task::{Cell, ContractId, ContractStateVector, CrossChainTask, InputPartyVector, PartyId, Utility};
use crate::value::{KnowledgeSet, Value};

/// An exact rational written as an integer (`-1`) or a string (`"3/4"`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalText(pub Utility);

impl Serialize for RationalText {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0.is_integer().then(|| self.0.to_integer().to_i64()).flatten() {
            Some(i) => serializer.serialize_i64(i),
            None => serializer.collect_str(&self.0),
        }
    }
}

impl<'de> Deserialize<'de> for RationalText {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(i) => Ok(RationalText(BigRational::from_integer(BigInt::from(i)))),
            Raw::Text(s) => s
                .trim()
                .parse::<BigRational>()
                .map(RationalText)
                .map_err(|_| serde::de::Error::custom(format!("`{s}` is not an exact rational such as 3 or -1/2"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(rename = "party")]
    pub parties: Vec<PartyDecl>,
    #[serde(rename = "contract")]
    pub contracts: Vec<ContractDecl>,
    pub task: TaskDecl,
    #[serde(rename = "strategy", default)]
    pub strategies: Vec<StrategyDecl>,
    pub protocol: ProtocolDecl,
    #[serde(default)]
    pub catalog: CatalogDecl,
    #[serde(default)]
    pub checker: CheckerDecl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyDecl {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
    #[serde(default)]
    pub knowledge: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<AutomatonDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomatonDecl {
    pub states: Vec<String>,
    pub initial: Vec<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub internal: Vec<String>,
    #[serde(default)]
    pub steps: Vec<[String; 3]>,
}

impl AutomatonDecl {
    pub fn build(&self, name: &str) -> Result<InterfaceAutomaton, crate::automata::AutomatonError> {
        let ids = |v: &[String]| v.iter().map(|a| ActionId::new(a.as_str())).collect::<Vec<_>>();
        InterfaceAutomaton::new(
            name,
            self.states.iter().map(|s| StateId::atom(s.as_str())),
            self.initial.iter().map(|s| StateId::atom(s.as_str())),
            ids(&self.inputs),
            ids(&self.outputs),
            ids(&self.internal),
            self.steps.iter().map(|[f, a, t]| Step::new(f.as_str(), a.as_str(), t.as_str())),
        )
    }
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContractDecl {
    Htlc {
        name: String,
        asset: String,
        owner: String,
        beneficiary: String,
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        refund: bool,
    },
    Table {
        name: String,
        states: Vec<String>,
        initial: Vec<String>,
        #[serde(default)]
        internal: Vec<String>,
        steps: Vec<[String; 3]>,
        outcomes: BTreeMap<String, String>,
        #[serde(default)]
        timers: Vec<TimerDecl>,
        #[serde(default)]
        publish: BTreeMap<String, Vec<Value>>,
    },
}

impl ContractDecl {
    pub fn name(&self) -> &str {
        match self {
            ContractDecl::Htlc { name, .. } | ContractDecl::Table { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerDecl {
    pub from: String,
    pub action: String,
    pub after: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDecl {
    pub party_inputs: Vec<Vec<String>>,
    pub contract_inputs: Vec<Vec<String>>,
    pub outputs: Vec<Vec<String>>,
    pub utility: Vec<UtilityRow>,
}

/// Utilities of every party for one `(I_P, I_C, O_C)` index triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityRow {
    pub cell: [usize; 3],
    pub values: Vec<RationalText>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyDecl {
    HtlcInitiator {
        name: String,
        own: String,
        counter: String,
        secret: String,
        timeout_steps: u64,
    },
    HtlcResponder {
        name: String,
        own: String,
        counter: String,
        timeout_steps: u64,
        counter_steps: u64,
    },
    Script {
        name: String,
        #[serde(default)]
        sends: Vec<SendDecl>,
        #[serde(default)]
        disclose: Vec<DiscloseDecl>,
    },
    Idle {
        name: String,
    },
}

impl StrategyDecl {
    pub fn name(&self) -> &str {
        match self {
            StrategyDecl::HtlcInitiator { name, .. }
            | StrategyDecl::HtlcResponder { name, .. }
            | StrategyDecl::Script { name, .. }
            | StrategyDecl::Idle { name } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SendDecl {
    pub round: u64,
    pub contract: String,
    pub function: String,
    #[serde(default)]
    pub payload: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscloseDecl {
    pub round: u64,
    pub to: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDecl {
    /// Party name to strategy name.
    pub compliant: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDecl {
    /// Generate withhold/corrupt/divert mutations of every compliant call.
    #[serde(default = "yes")]
    pub generate: bool,
    /// Also generate delay and replay mutations.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub entry: Vec<EntryDecl>,
    #[serde(default)]
    pub joint: Vec<JointDecl>,
}

impl Default for CatalogDecl {
    fn default() -> Self {
        CatalogDecl {
            generate: true,
            timing: false,
            entry: Vec::new(),
            joint: Vec::new(),
        }
    }
}

/// A named deviation for one party: a strategy (default: the party's
/// compliant one) optionally wrapped in a mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDecl {
    pub name: String,
    pub party: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

/// Several deviating parties acting together and pooling knowledge. Each
/// member names one of that party's entries or a declared strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDecl {
    pub name: String,
    pub members: BTreeMap<String, String>,
}

fn default_policies() -> Vec<String> {
    vec!["immediate".into(), "adversarial-max".into()]
}

fn default_delta() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerDecl {
    #[serde(default = "default_delta")]
    pub delta: u64,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default)]
    pub exhaustive_delays: bool,
    #[serde(default)]
    pub exhaustive_order: bool,
}

impl Default for CheckerDecl {
    fn default() -> Self {
        CheckerDecl {
            delta: default_delta(),
            policies: default_policies(),
            exhaustive_delays: false,
            exhaustive_order: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} error(s):\n{}", count_errors(.0), join_lines(.0))]
    Invalid(Vec<Diagnostic>),
}

fn count_errors(d: &[Diagnostic]) -> usize {
    d.iter().filter(|d| d.severity == Severity::Error).count()
}

fn join_lines(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// Resolves `path`, trying a `.toml` suffix when the bare path is missing.
pub fn resolve_path(path: &Path) -> PathBuf {
    if !path.exists() && path.extension().is_none() {
        let with_ext = path.with_extension("toml");
        if with_ext.exists() {
            return with_ext;
        }
    }
    path.to_path_buf()
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let path = resolve_path(path);
        let text = std::fs::read_to_string(&path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios always serialise")
    }

    /// Every diagnostic, without running anything beyond the compliant
    /// execution needed to generate mutations.
    pub fn validate(&self) -> Vec<Diagnostic> {
        self.build().1
    }

    pub fn compile(&self) -> Result<(Protocol, StrategyCatalog), ScenarioError> {
        match self.build() {
            (Some(built), _) => Ok(built),
            (None, diagnostics) => Err(ScenarioError::Invalid(diagnostics)),
        }
    }

    fn build(&self) -> (Option<(Protocol, StrategyCatalog)>, Vec<Diagnostic>) {
        let mut b = Builder {
            s: self,
            diags: Vec::new(),
        };
        let built = b.run();
        let ok = !b.diags.iter().any(|d| d.severity == Severity::Error);
        (if ok { built } else { None }, b.diags)
    }
}

struct Builder<'a> {
    s: &'a Scenario,
    diags: Vec<Diagnostic>,
}

impl Builder<'_> {
    fn error(&mut self, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    fn party(&self, name: &str) -> Option<PartyId> {
        self.s.parties.iter().position(|p| p.name == name).map(PartyId)
    }

    fn contract(&self, name: &str) -> Option<ContractId> {
        self.s.contracts.iter().position(|c| c.name() == name).map(ContractId)
    }

    fn duplicates<'n>(&mut self, what: &str, names: impl IntoIterator<Item = &'n str>) {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n) {
                self.error(format!("duplicate {what} `{n}`"));
            }
        }
    }

    fn run(&mut self) -> Option<(Protocol, StrategyCatalog)> {
        let s = self.s;
        if s.parties.is_empty() {
            self.error("scenario declares no parties");
        }
        if s.contracts.is_empty() {
            self.error("scenario declares no contracts");
        }
        self.duplicates("party", s.parties.iter().map(|p| p.name.as_str()));
        self.duplicates("contract", s.contracts.iter().map(|c| c.name()));
        self.duplicates("strategy", s.strategies.iter().map(|st| st.name()));
        for p in &s.parties {
            if p.name.contains(['.', '@', ',']) || p.name.is_empty() {
                self.error(format!("party name `{}` must be non-empty and free of `.`, `@` and `,`", p.name));
            }
        }
        for c in &s.contracts {
            if c.name().contains(['.', '@', ',']) || c.name().is_empty() {
                self.error(format!("contract name `{}` must be non-empty and free of `.`, `@` and `,`", c.name()));
            }
        }

        let party_names: Vec<String> = s.parties.iter().map(|p| p.name.clone()).collect();
        let contracts = self.contracts(&party_names);
        let party_automata = self.party_automata();
        let task = self.task(contracts.as_deref());
        let compliant = self.compliant();
        let options = self.checker_options();
        let delta = s.checker.delta;
        let horizon = s.protocol.horizon.unwrap_or(6 * (delta + 1));
        if horizon == 0 {
            self.error("protocol.horizon must be at least 1");
        }

        let (contracts, task, compliant, party_automata, options) =
            (contracts?, task?, compliant?, party_automata?, options?);
        if self.diags.iter().any(|d| d.severity == Severity::Error) {
            return None;
        }
        let system = System {
            parties: s
                .parties
                .iter()
                .map(|p| PartyInfo {
                    name: p.name.clone(),
                    display: p.display.clone().unwrap_or_else(|| p.name.clone()),
                    knowledge: p.knowledge.clone(),
                })
                .collect(),
            contracts,
            delta,
        };
        let protocol = Protocol {
            name: s.name.clone(),
            task,
            system,
            compliant,
            party_automata,
            horizon,
            options,
        };
        let catalog = self.catalog(&protocol)?;
        Some((protocol, catalog))
    }

    fn contracts(&mut self, parties: &[String]) -> Option<Vec<Contract>> {
        let mut out = Vec::new();
        let mut ok = true;
        for decl in &self.s.contracts {
            match decl {
                ContractDecl::Htlc {
                    name,
                    asset,
                    owner,
                    beneficiary,
                    refund,
                } => {
                    for (role, p) in [("owner", owner), ("beneficiary", beneficiary)] {
                        if !parties.contains(p) {
                            self.error(format!("contract `{name}`: {role} `{p}` is not a declared party"));
                            ok = false;
                        }
                    }
                    if owner == beneficiary {
                        self.error(format!("contract `{name}`: owner and beneficiary are both `{owner}`"));
                        ok = false;
                    }
                    out.push(Contract::Htlc(HtlcContract {
                        name: name.clone(),
                        asset: asset.clone(),
                        owner: owner.clone(),
                        beneficiary: beneficiary.clone(),
                        refund: *refund,
                    }));
                }
                ContractDecl::Table {
                    name,
                    states,
                    initial,
                    internal,
                    steps,
                    outcomes,
                    timers,
                    publish,
                } => {
                    for [_, action, _] in steps {
                        if internal.contains(action) {
                            continue;
                        }
                        match split_call_action(&ActionId::new(action.as_str())) {
                            Some((p, _, _)) if !parties.iter().any(|x| x == p) => {
                                self.error(format!("contract `{name}`: step `{action}` is called by undeclared party `{p}`"));
                                ok = false;
                            }
                            _ => {}
                        }
                    }
                    let built = TableContract::new(
                        name,
                        states.clone(),
                        initial.clone(),
                        internal.iter().map(|a| ActionId::new(a.as_str())).collect(),
                        steps
                            .iter()
                            .map(|[f, a, t]| (f.clone(), ActionId::new(a.as_str()), t.clone()))
                            .collect(),
                        outcomes.clone(),
                        timers
                            .iter()
                            .map(|t| Timer {
                                from: t.from.clone(),
                                action: ActionId::new(t.action.as_str()),
                                after: t.after,
                            })
                            .collect(),
                        publish.clone(),
                    );
                    match built {
                        Ok(t) => out.push(Contract::Table(t)),
                        Err(e) => {
                            self.error(format!("contract `{name}`: {e}"));
                            ok = false;
                        }
                    }
                }
            }
        }
        ok.then_some(out)
    }

    fn party_automata(&mut self) -> Option<Vec<Option<InterfaceAutomaton>>> {
        let mut out = Vec::new();
        let mut ok = true;
        for p in &self.s.parties {
            match &p.automaton {
                None => out.push(None),
                Some(decl) => match decl.build(&p.name) {
                    Ok(a) => out.push(Some(a)),
                    Err(e) => {
                        self.error(format!("party `{}` automaton: {e}", p.name));
                        ok = false;
                    }
                },
            }
        }
        ok.then_some(out)
    }

    fn task(&mut self, contracts: Option<&[Contract]>) -> Option<CrossChainTask> {
        let t = &self.s.task;
        let (m, n) = (self.s.parties.len(), self.s.contracts.len());
        let mut ok = true;
        for (i, v) in t.party_inputs.iter().enumerate() {
            if v.len() != m {
                self.error(format!("task.party_inputs[{i}] has {} entries, expected {m}", v.len()));
                ok = false;
            }
        }
        for (what, vectors) in [("contract_inputs", &t.contract_inputs), ("outputs", &t.outputs)] {
            for (i, v) in vectors.iter().enumerate() {
                if v.len() != n {
                    self.error(format!("task.{what}[{i}] has {} entries, expected {n}", v.len()));
                    ok = false;
                    continue;
                }
                let Some(contracts) = contracts else { continue };
                for (label, c) in v.iter().zip(contracts) {
                    let valid = if what == "contract_inputs" {
                        c.initial_labels().contains(label)
                    } else {
                        c.all_labels().contains(label)
                    };
                    if !valid {
                        let kind = if what == "contract_inputs" { "an initial" } else { "a" };
                        self.error(format!(
                            "task.{what}[{i}]: `{label}` is not {kind} state label of contract `{}`",
                            c.name()
                        ));
                        ok = false;
                    }
                }
            }
        }
        if t.party_inputs.is_empty() || t.contract_inputs.is_empty() || t.outputs.is_empty() {
            self.error("task needs at least one party input, contract input and output vector");
            ok = false;
        }

        let mut table: BTreeMap<Cell, Vec<Utility>> = BTreeMap::new();
        for row in &t.utility {
            let [p, c, o] = row.cell;
            if p >= t.party_inputs.len() || c >= t.contract_inputs.len() || o >= t.outputs.len() {
                self.error(format!("utility cell ({p}, {c}, {o}) is out of range"));
                ok = false;
                continue;
            }
            if row.values.len() != m {
                self.error(format!(
                    "utility cell ({p}, {c}, {o}) has {} values, expected {m}",
                    row.values.len()
                ));
                ok = false;
            }
            if table
                .insert(Cell::new(p, c, o), row.values.iter().map(|v| v.0.clone()).collect())
                .is_some()
            {
                self.error(format!("utility cell ({p}, {c}, {o}) is given twice"));
                ok = false;
            }
        }
        for p in 0..t.party_inputs.len() {
            for c in 0..t.contract_inputs.len() {
                for o in 0..t.outputs.len() {
                    if !table.contains_key(&Cell::new(p, c, o)) {
                        self.error(format!("utility table is missing cell ({p}, {c}, {o})"));
                        ok = false;
                    }
                }
            }
        }
        if !ok {
            return None;
        }
        match CrossChainTask::new(
            self.s.parties.iter().map(|p| p.name.clone()).collect(),
            self.s.contracts.iter().map(|c| c.name().to_string()).collect(),
            t.party_inputs.iter().cloned().map(InputPartyVector).collect(),
            t.contract_inputs.iter().cloned().map(ContractStateVector).collect(),
            t.outputs.iter().cloned().map(ContractStateVector).collect(),
            table,
        ) {
            Ok(task) => Some(task),
            Err(e) => {
                self.error(format!("task: {e}"));
                None
            }
        }
    }

    fn strategy_decl(&self, name: &str) -> Option<&StrategyDecl> {
        self.s.strategies.iter().find(|st| st.name() == name)
    }

    fn htlc(&self, name: &str) -> Option<(&String, &String)> {
        self.s.contracts.iter().find_map(|c| match c {
            ContractDecl::Htlc {
                name: n,
                owner,
                beneficiary,
                ..
            } if n == name => Some((owner, beneficiary)),
            _ => None,
        })
    }

    /// Builds the strategy `name` for `party`, reporting anything that
    /// would make it misbehave at run time.
    fn strategy(&mut self, name: &str, party: PartyId, context: &str) -> Option<StrategyRef> {
        let party_name = self.s.parties[party.0].name.clone();
        let Some(decl) = self.strategy_decl(name).cloned() else {
            self.error(format!("{context}: strategy `{name}` is not declared"));
            return None;
        };
        let knowledge = KnowledgeSet::from_values(&self.s.parties[party.0].knowledge);
        match decl {
            StrategyDecl::HtlcInitiator {
                name,
                own,
                counter,
                secret,
                timeout_steps,
            } => {
                let mut ok = self.check_htlc_roles(&name, &own, &counter, &party_name);
                if !knowledge.contains(&Value::secret(&secret)) {
                    self.error(format!("strategy `{name}` bound to `{party_name}`, who does not know secret:{secret}"));
                    ok = false;
                }
                ok.then(|| {
                    Arc::new(Initiator {
                        name,
                        own,
                        counter,
                        secret,
                        timeout_steps,
                    }) as StrategyRef
                })
            }
            StrategyDecl::HtlcResponder {
                name,
                own,
                counter,
                timeout_steps,
                counter_steps,
            } => self.check_htlc_roles(&name, &own, &counter, &party_name).then(|| {
                Arc::new(Responder {
                    name,
                    own,
                    counter,
                    timeout_steps,
                    counter_steps,
                }) as StrategyRef
            }),
            StrategyDecl::Script { name, sends, disclose } => {
                let mut ok = true;
                let mut script_sends = Vec::new();
                for send in &sends {
                    match self.contract(&send.contract) {
                        Some(c) => script_sends.push(ScriptSend {
                            round: send.round,
                            contract: c,
                            function: send.function.clone(),
                            payload: send.payload.clone(),
                        }),
                        None => {
                            self.error(format!("strategy `{name}`: unknown contract `{}`", send.contract));
                            ok = false;
                        }
                    }
                    if let Some(v) = send.payload.iter().find(|v| !knowledge.can_produce(v)) {
                        self.warn(format!(
                            "strategy `{name}` bound to `{party_name}` sends {v}, which it does not know initially"
                        ));
                    }
                }
                let mut script_disclosures = Vec::new();
                for d in &disclose {
                    match self.party(&d.to) {
                        Some(to) => script_disclosures.push(ScriptDisclosure {
                            round: d.round,
                            to,
                            value: d.value.clone(),
                        }),
                        None => {
                            self.error(format!("strategy `{name}`: discloses to undeclared party `{}`", d.to));
                            ok = false;
                        }
                    }
                }
                ok.then(|| Arc::new(Script::new(name, script_sends, script_disclosures)) as StrategyRef)
            }
            StrategyDecl::Idle { name } => Some(Arc::new(Idle::new(name))),
        }
    }

    fn check_htlc_roles(&mut self, strategy: &str, own: &str, counter: &str, party: &str) -> bool {
        let mut ok = true;
        match self.htlc(own) {
            Some((owner, _)) if owner == party => {}
            Some((owner, _)) => {
                let owner = owner.clone();
                self.error(format!(
                    "strategy `{strategy}` bound to `{party}` escrows on `{own}`, which belongs to `{owner}`"
                ));
                ok = false;
            }
            None => {
                self.error(format!("strategy `{strategy}`: `{own}` is not an htlc contract"));
                ok = false;
            }
        }
        match self.htlc(counter) {
            Some((_, beneficiary)) if beneficiary == party => {}
            Some(_) => {
                self.error(format!(
                    "strategy `{strategy}` bound to `{party}` claims from `{counter}`, which does not pay `{party}`"
                ));
                ok = false;
            }
            None => {
                self.error(format!("strategy `{strategy}`: `{counter}` is not an htlc contract"));
                ok = false;
            }
        }
        ok
    }

    fn compliant(&mut self) -> Option<Vec<StrategyRef>> {
        let bindings = &self.s.protocol.compliant;
        for party in bindings.keys() {
            if self.party(party).is_none() {
                self.error(format!("protocol.compliant binds undeclared party `{party}`"));
            }
        }
        let mut out = Vec::new();
        let mut ok = true;
        for (i, p) in self.s.parties.iter().enumerate() {
            match bindings.get(&p.name) {
                Some(strategy) => match self.strategy(strategy, PartyId(i), "protocol.compliant") {
                    Some(s) => out.push(s),
                    None => ok = false,
                },
                None => {
                    self.error(format!("protocol.compliant has no strategy for party `{}`", p.name));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn checker_options(&mut self) -> Option<CheckerOptions> {
        let c = &self.s.checker;
        let mut policies = Vec::new();
        let mut bad = Vec::new();
        for p in &c.policies {
            match DeliveryPolicy::parse(p) {
                Some(policy) if !policies.contains(&policy) => policies.push(policy),
                Some(_) => {}
                None => bad.push(p.clone()),
            }
        }
        if c.exhaustive_delays && !policies.contains(&DeliveryPolicy::Exhaustive) {
            policies.push(DeliveryPolicy::Exhaustive);
        }
        for p in &bad {
            self.error(format!("checker.policies: unknown delivery policy `{p}`"));
        }
        if policies.is_empty() && bad.is_empty() {
            self.error("checker.policies is empty");
        }
        (bad.is_empty() && !policies.is_empty()).then_some(CheckerOptions {
            policies,
            exhaustive_order: c.exhaustive_order,
        })
    }

    fn catalog(&mut self, protocol: &Protocol) -> Option<StrategyCatalog> {
        let decl = &self.s.catalog;
        let mut entries: Vec<CatalogEntry> = Vec::new();
        let mut ok = true;
        for e in &decl.entry {
            let context = format!("catalog entry `{}`", e.name);
            let Some(party) = self.party(&e.party) else {
                self.error(format!("{context}: undeclared party `{}`", e.party));
                ok = false;
                continue;
            };
            if entries.iter().any(|x| x.members[0].0 == party && x.name == e.name) {
                self.error(format!("{context}: duplicate entry for party `{}`", e.party));
                ok = false;
                continue;
            }
            let base = match &e.strategy {
                Some(name) => self.strategy(name, party, &context),
                None => Some(protocol.compliant[party.0].clone()),
            };
            let Some(base) = base else {
                ok = false;
                continue;
            };
            let strategy: StrategyRef = match &e.mutation {
                Some(m) => {
                    if self.contract(&m.call().contract).is_none() {
                        self.error(format!("{context}: mutation targets unknown contract `{}`", m.call().contract));
                        ok = false;
                        continue;
                    }
                    Arc::new(Mutated::new(e.name.clone(), base, m.clone()))
                }
                None if e.strategy.is_none() => {
                    self.error(format!("{context}: needs a strategy or a mutation"));
                    ok = false;
                    continue;
                }
                None => base,
            };
            entries.push(CatalogEntry {
                name: e.name.clone(),
                members: vec![(party, strategy)],
                mutation: e.mutation.clone(),
                generated: false,
            });
        }

        let mut joints = Vec::new();
        for j in &decl.joint {
            let context = format!("joint entry `{}`", j.name);
            if j.members.len() < 2 {
                self.error(format!("{context}: needs at least two members"));
                ok = false;
                continue;
            }
            let mut members = Vec::new();
            for (party_name, what) in &j.members {
                let Some(party) = self.party(party_name) else {
                    self.error(format!("{context}: undeclared party `{party_name}`"));
                    ok = false;
                    continue;
                };
                let existing = entries
                    .iter()
                    .find(|e| e.members[0].0 == party && &e.name == what)
                    .map(|e| e.members[0].1.clone());
                match existing.or_else(|| self.strategy(what, party, &context)) {
                    Some(s) => members.push((party, s)),
                    None => ok = false,
                }
            }
            joints.push(CatalogEntry {
                name: j.name.clone(),
                members,
                mutation: None,
                generated: false,
            });
        }
        if !ok {
            return None;
        }
        entries.extend(joints);

        let generation = Generation {
            payload: decl.generate,
            timing: decl.timing,
        };
        match StrategyCatalog::generate(protocol, entries, generation) {
            Ok(catalog) => {
                for (i, p) in protocol.system.parties.iter().enumerate() {
                    if catalog.for_party(PartyId(i)).next().is_none() {
                        self.warn(format!("catalog has no deviating strategy for party `{}`", p.name));
                    }
                }
                Some(catalog)
            }
            Err(e) => {
                self.error(format!("compliant execution failed: {e}"));
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_column_counts_from_one() {
        let text = "a = 1\nbb = [\n  3x";
        assert_eq!(line_column(text, 0), (1, 1));
        assert_eq!(line_column(text, 6), (2, 1));
        assert_eq!(line_column(text, 15), (3, 3));
    }

    #[test]
    fn rationals_accept_integers_and_fractions() {
        #[derive(Deserialize, Serialize)]
        struct Row {
            values: Vec<RationalText>,
        }
        let row: Row = toml::from_str(r#"values = [1, "-3/4", " 2 "]"#).unwrap();
        let half = BigRational::new(BigInt::from(-3), BigInt::from(4));
        assert_eq!(row.values[1].0, half);
        assert_eq!(row.values[2].0, BigRational::from_integer(BigInt::from(2)));
        let back = toml::to_string(&row).unwrap();
        assert!(back.contains(r#"values = [1, "-3/4", 2]"#), "{back}");
        assert!(toml::from_str::<Row>(r#"values = ["x"]"#).is_err());
    }
}
