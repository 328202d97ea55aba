//! Cross-chain tasks: input/output vectors, exact utilities, transition
//! classification and the three feasibility conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Utility = BigRational;

pub fn utility(n: i64) -> Utility {
    BigRational::from_integer(BigInt::from(n))
}

/// Dense 0-based index into the system's party list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub usize);

/// Dense 0-based index into the system's contract list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractId(pub usize);

/// One opaque input value per party.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputPartyVector(pub Vec<String>);

/// One state label per contract, e.g. `["a↪A", "b↪B"]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractStateVector(pub Vec<String>);

impl ContractStateVector {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        ContractStateVector(labels.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for ContractStateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

impl fmt::Display for InputPartyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("party input vector {0} has the wrong length")]
    PartyVectorLength(InputPartyVector),
    #[error("contract state vector {0} has the wrong length")]
    ContractVectorLength(ContractStateVector),
    #[error("utility row ({0}, {1}, {2}) has the wrong number of entries")]
    UtilityRowLength(usize, usize, usize),
    #[error("utility table has no entry for cell ({0}, {1}, {2})")]
    MissingUtility(usize, usize, usize),
    #[error("utility cell ({0}, {1}, {2}) is outside the declared vector sets")]
    UtilityOutOfRange(usize, usize, usize),
    #[error("transition is outside the task domain: {0}")]
    OutsideDomain(String),
    #[error("unknown party index {0}")]
    UnknownParty(usize),
    #[error("duplicate entry in {0}")]
    DuplicateVector(&'static str),
}

/// Indices `(I_P, I_C, O_C)` into a task's three vector sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub party_inputs: usize,
    pub contract_inputs: usize,
    pub outputs: usize,
}

impl Cell {
    pub fn new(party_inputs: usize, contract_inputs: usize, outputs: usize) -> Self {
        Cell {
            party_inputs,
            contract_inputs,
            outputs,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.party_inputs, self.contract_inputs, self.outputs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub party_inputs: InputPartyVector,
    pub contract_inputs: ContractStateVector,
    pub outputs: ContractStateVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Preferred,
    AcceptableNotPreferred,
    Unacceptable,
}

impl Classification {
    pub fn is_acceptable(self) -> bool {
        !matches!(self, Classification::Unacceptable)
    }

    pub fn is_preferred(self) -> bool {
        matches!(self, Classification::Preferred)
    }
}

/// A cross-chain task `(I_P, I_C, O_C, U)` over finite, explicit sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossChainTask {
    parties: Vec<String>,
    contracts: Vec<String>,
    party_inputs: Vec<InputPartyVector>,
    contract_inputs: Vec<ContractStateVector>,
    outputs: Vec<ContractStateVector>,
    utility: BTreeMap<Cell, Vec<Utility>>,
}

impl CrossChainTask {
    /// Checks vector lengths and that the utility table is total over
    /// `I_P × I_C × O_C`.
    pub fn new(
        parties: Vec<String>,
        contracts: Vec<String>,
        party_inputs: Vec<InputPartyVector>,
        contract_inputs: Vec<ContractStateVector>,
        outputs: Vec<ContractStateVector>,
        utility: BTreeMap<Cell, Vec<Utility>>,
    ) -> Result<Self, TaskError> {
        let (m, n) = (parties.len(), contracts.len());
        if let Some(v) = party_inputs.iter().find(|v| v.0.len() != m) {
            return Err(TaskError::PartyVectorLength(v.clone()));
        }
        if let Some(v) = contract_inputs.iter().chain(&outputs).find(|v| v.0.len() != n) {
            return Err(TaskError::ContractVectorLength(v.clone()));
        }
        if has_duplicates(&party_inputs) {
            return Err(TaskError::DuplicateVector("party inputs"));
        }
        if has_duplicates(&contract_inputs) {
            return Err(TaskError::DuplicateVector("contract inputs"));
        }
        if has_duplicates(&outputs) {
            return Err(TaskError::DuplicateVector("contract outputs"));
        }
        for (cell, row) in &utility {
            if cell.party_inputs >= party_inputs.len()
                || cell.contract_inputs >= contract_inputs.len()
                || cell.outputs >= outputs.len()
            {
                return Err(TaskError::UtilityOutOfRange(cell.party_inputs, cell.contract_inputs, cell.outputs));
            }
            if row.len() != m {
                return Err(TaskError::UtilityRowLength(cell.party_inputs, cell.contract_inputs, cell.outputs));
            }
        }
        let task = CrossChainTask {
            parties,
            contracts,
            party_inputs,
            contract_inputs,
            outputs,
            utility,
        };
        if let Some(cell) = task.cells().find(|c| !task.utility.contains_key(c)) {
            return Err(TaskError::MissingUtility(cell.party_inputs, cell.contract_inputs, cell.outputs));
        }
        Ok(task)
    }

    pub fn parties(&self) -> &[String] {
        &self.parties
    }

    pub fn contracts(&self) -> &[String] {
        &self.contracts
    }

    pub fn party_inputs(&self) -> &[InputPartyVector] {
        &self.party_inputs
    }

    pub fn contract_inputs(&self) -> &[ContractStateVector] {
        &self.contract_inputs
    }

    pub fn outputs(&self) -> &[ContractStateVector] {
        &self.outputs
    }

    pub fn utility_table(&self) -> &BTreeMap<Cell, Vec<Utility>> {
        &self.utility
    }

    pub fn all_parties(&self) -> BTreeSet<PartyId> {
        (0..self.parties.len()).map(PartyId).collect()
    }

    pub fn party_index(&self, name: &str) -> Option<PartyId> {
        self.parties.iter().position(|p| p == name).map(PartyId)
    }

    pub fn output_index(&self, v: &ContractStateVector) -> Option<usize> {
        self.outputs.iter().position(|o| o == v)
    }

    /// Every cell of `I_P × I_C × O_C` in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.party_inputs.len()).flat_map(move |p| {
            (0..self.contract_inputs.len())
                .flat_map(move |c| (0..self.outputs.len()).map(move |o| Cell::new(p, c, o)))
        })
    }

    pub fn cell_of(&self, t: &Transition) -> Result<Cell, TaskError> {
        let p = self.party_inputs.iter().position(|v| v == &t.party_inputs);
        let c = self.contract_inputs.iter().position(|v| v == &t.contract_inputs);
        let o = self.outputs.iter().position(|v| v == &t.outputs);
        match (p, c, o) {
            (Some(p), Some(c), Some(o)) => Ok(Cell::new(p, c, o)),
            _ => Err(TaskError::OutsideDomain(format!(
                "({}, {}, {})",
                t.party_inputs, t.contract_inputs, t.outputs
            ))),
        }
    }

    pub fn transition(&self, cell: Cell) -> Transition {
        Transition {
            party_inputs: self.party_inputs[cell.party_inputs].clone(),
            contract_inputs: self.contract_inputs[cell.contract_inputs].clone(),
            outputs: self.outputs[cell.outputs].clone(),
        }
    }

    pub fn utilities(&self, cell: Cell) -> Result<&[Utility], TaskError> {
        self.utility
            .get(&cell)
            .map(Vec::as_slice)
            .ok_or(TaskError::MissingUtility(cell.party_inputs, cell.contract_inputs, cell.outputs))
    }

    pub fn party_utility(&self, t: &Transition, party: PartyId) -> Result<Utility, TaskError> {
        let cell = self.cell_of(t)?;
        self.party_utility_at(cell, party)
    }

    pub fn party_utility_at(&self, cell: Cell, party: PartyId) -> Result<Utility, TaskError> {
        self.utilities(cell)?
            .get(party.0)
            .cloned()
            .ok_or(TaskError::UnknownParty(party.0))
    }

    pub fn coalition_utility(&self, t: &Transition, coalition: &BTreeSet<PartyId>) -> Result<Utility, TaskError> {
        let cell = self.cell_of(t)?;
        self.coalition_utility_at(cell, coalition)
    }

    pub fn coalition_utility_at(&self, cell: Cell, coalition: &BTreeSet<PartyId>) -> Result<Utility, TaskError> {
        let row = self.utilities(cell)?;
        coalition.iter().try_fold(Utility::zero(), |acc, p| {
            row.get(p.0)
                .map(|u| acc + u)
                .ok_or(TaskError::UnknownParty(p.0))
        })
    }

    pub fn classify_transition(&self, t: &Transition) -> Result<Classification, TaskError> {
        let cell = self.cell_of(t)?;
        self.classify_cell(cell)
    }

    pub fn classify_cell(&self, cell: Cell) -> Result<Classification, TaskError> {
        let row = self.utilities(cell)?;
        Ok(if row.iter().all(Signed::is_positive) {
            Classification::Preferred
        } else if row.iter().all(|u| !u.is_negative()) {
            Classification::AcceptableNotPreferred
        } else {
            Classification::Unacceptable
        })
    }

    pub fn check_feasibility(&self) -> FeasibilityReport {
        FeasibilityReport {
            null_transition: self.null_transition_verdict(),
            preferred_exists: self.preferred_exists_verdict(),
            input_robustness: self.input_robustness_verdict(),
        }
    }

    fn null_transition_verdict(&self) -> ConditionVerdict {
        for (c, ic) in self.contract_inputs.iter().enumerate() {
            let Some(o) = self.output_index(ic) else {
                return ConditionVerdict::fail(FeasibilityWitness::InputNotAnOutput {
                    contract_inputs: c,
                    vector: ic.clone(),
                });
            };
            for p in 0..self.party_inputs.len() {
                let cell = Cell::new(p, c, o);
                if !self.classify_cell(cell).map(Classification::is_acceptable).unwrap_or(false) {
                    return ConditionVerdict::fail(FeasibilityWitness::NullTransitionUnacceptable { cell });
                }
            }
        }
        ConditionVerdict::pass()
    }

    fn preferred_exists_verdict(&self) -> ConditionVerdict {
        for p in 0..self.party_inputs.len() {
            for c in 0..self.contract_inputs.len() {
                let found = (0..self.outputs.len()).any(|o| {
                    self.classify_cell(Cell::new(p, c, o))
                        .map(Classification::is_preferred)
                        .unwrap_or(false)
                });
                if !found {
                    return ConditionVerdict::fail(FeasibilityWitness::NoPreferredOutcome {
                        party_inputs: p,
                        contract_inputs: c,
                    });
                }
            }
        }
        ConditionVerdict::pass()
    }

    fn input_robustness_verdict(&self) -> ConditionVerdict {
        let ips = self.party_inputs.len();
        for first in 0..ips {
            for second in 0..ips {
                for party in 0..self.parties.len() {
                    if self.party_inputs[first].0[party] != self.party_inputs[second].0[party] {
                        continue;
                    }
                    for c in 0..self.contract_inputs.len() {
                        for o in 0..self.outputs.len() {
                            let honest = &self.utility[&Cell::new(first, c, o)][party];
                            let lied = &self.utility[&Cell::new(second, c, o)][party];
                            if !honest.is_negative() && lied.is_negative() {
                                return ConditionVerdict::fail(FeasibilityWitness::InputLieHurts {
                                    party: PartyId(party),
                                    truthful: Cell::new(first, c, o),
                                    altered: Cell::new(second, c, o),
                                });
                            }
                        }
                    }
                }
            }
        }
        ConditionVerdict::pass()
    }
}

fn has_duplicates<T: Ord>(items: &[T]) -> bool {
    let mut seen = BTreeSet::new();
    !items.iter().all(|x| seen.insert(x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibilityWitness {
    InputNotAnOutput {
        contract_inputs: usize,
        vector: ContractStateVector,
    },
    NullTransitionUnacceptable {
        cell: Cell,
    },
    NoPreferredOutcome {
        party_inputs: usize,
        contract_inputs: usize,
    },
    InputLieHurts {
        party: PartyId,
        truthful: Cell,
        altered: Cell,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub pass: bool,
    pub witness: Option<FeasibilityWitness>,
}

impl ConditionVerdict {
    fn pass() -> Self {
        ConditionVerdict { pass: true, witness: None }
    }

    fn fail(witness: FeasibilityWitness) -> Self {
        ConditionVerdict {
            pass: false,
            witness: Some(witness),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `I_C ⊆ O_C` and every null transition is acceptable.
    pub null_transition: ConditionVerdict,
    /// Every `(I_P, I_C)` admits a preferred outcome.
    pub preferred_exists: ConditionVerdict,
    /// Lying about another party's input never turns an acceptable outcome
    /// unacceptable.
    pub input_robustness: ConditionVerdict,
}

impl FeasibilityReport {
    pub fn passes(&self) -> bool {
        self.null_transition.pass && self.preferred_exists.pass && self.input_robustness.pass
    }
}
