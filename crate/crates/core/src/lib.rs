//! Interface automata, a four-phase synchronous round scheduler and an
//! exhaustive checker for Safety, Liveness and Coalition Nash Equilibrium of
//! cross-chain protocols, with the two-party hashed-timelock swap built in.

pub mod automata;
pub mod checker;
pub mod contract;
pub mod report;
pub mod scenario;
pub mod scheduler;
pub mod strategy;
pub mod swap;
pub mod task;
pub mod trace;
pub mod value;

pub use automata::{ActionId, InterfaceAutomaton, StateId, Step};
pub use task::{ContractId, ContractStateVector, CrossChainTask, InputPartyVector, PartyId, Transition};
pub use value::{KnowledgeSet, Value};
