//! Execution traces: one event per line, fixed field order
//! `round, phase, actor, kind, action, payload, state`.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// Phase 1: a staged call leaves its sender. `state` is `deliver@r`.
    Send,
    /// Phase 2: a contract accepted a call. `state` is its new phase.
    Step,
    /// Phase 2: a contract consumed a call without changing state.
    Reject,
    /// Phase 2: a contract timer fired. `payload` carries the deadline.
    Timeout,
    /// Phase 3: a party acquired a new value. `action` names the source.
    Learn,
    /// Phase 4: a party staged a call for the next round.
    Stage,
    /// Phase 4: a party handed a value to another party off-chain.
    Disclose,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Send => "send",
            EventKind::Step => "step",
            EventKind::Reject => "reject",
            EventKind::Timeout => "timeout",
            EventKind::Learn => "learn",
            EventKind::Stage => "stage",
            EventKind::Disclose => "disclose",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    pub phase: u8,
    pub actor: String,
    pub kind: EventKind,
    pub action: String,
    pub payload: Vec<String>,
    pub state: String,
}

impl TraceEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialise")
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r{:<3} p{} {:<8} {:<8} {}",
            self.round, self.phase, self.actor, self.kind, self.action
        )?;
        if !self.payload.is_empty() {
            write!(f, " [{}]", self.payload.join(", "))?;
        }
        if !self.state.is_empty() {
            write!(f, " -> {}", self.state)?;
        }
        Ok(())
    }
}

pub fn to_json_lines(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_order_is_fixed() {
        let e = TraceEvent {
            round: 2,
            phase: 2,
            actor: "C_A".into(),
            kind: EventKind::Step,
            action: "A.escrow.C_A".into(),
            payload: vec!["token:a".into()],
            state: "Escrowed".into(),
        };
        assert_eq!(
            e.to_json_line(),
            r#"{"round":2,"phase":2,"actor":"C_A","kind":"step","action":"A.escrow.C_A","payload":["token:a"],"state":"Escrowed"}"#
        );
        let back: TraceEvent = serde_json::from_str(&e.to_json_line()).unwrap();
        assert_eq!(back, e);
    }
}
