//! Symbolic values and per-party knowledge. Hashes are opaque: anyone who
//! knows `s` can build `hash:s`, nobody can recover `s` from `hash:s`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Token(String),
    Secret(String),
    HashOf(String),
    Plain(String),
    Composite(Vec<Value>),
}

impl Value {
    pub fn token(name: impl Into<String>) -> Self {
        Value::Token(name.into())
    }

    pub fn secret(name: impl Into<String>) -> Self {
        Value::Secret(name.into())
    }

    pub fn hash_of(name: impl Into<String>) -> Self {
        Value::HashOf(name.into())
    }

    pub fn plain(literal: impl ToString) -> Self {
        Value::Plain(literal.to_string())
    }

    /// Atomic parts, recursing through composites.
    pub fn atoms(&self) -> Vec<&Value> {
        match self {
            Value::Composite(parts) => parts.iter().flat_map(Value::atoms).collect(),
            atom => vec![atom],
        }
    }

    pub fn as_plain_u64(&self) -> Option<u64> {
        match self {
            Value::Plain(s) => s.parse().ok(),
            _ => None,
        }
    }

    /// True if `self` is or contains `needle`.
    pub fn mentions(&self, needle: &Value) -> bool {
        self == needle || self.atoms().contains(&needle)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Token(n) => write!(f, "token:{n}"),
            Value::Secret(n) => write!(f, "secret:{n}"),
            Value::HashOf(n) => write!(f, "hash:{n}"),
            Value::Plain(n) => write!(f, "plain:{n}"),
            Value::Composite(parts) => {
                f.write_str("(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse value `{input}`: {reason}")]
pub struct ValueParseError {
    pub input: String,
    pub reason: &'static str,
}

impl FromStr for Value {
    type Err = ValueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ValueParseError {
            input: s.to_string(),
            reason,
        };
        let (value, rest) = parse_value(s.trim()).map_err(err)?;
        if !rest.trim().is_empty() {
            return Err(err("trailing characters"));
        }
        Ok(value)
    }
}

fn parse_value(s: &str) -> Result<(Value, &str), &'static str> {
    if let Some(mut rest) = s.strip_prefix('(') {
        let mut parts = Vec::new();
        if let Some(after) = rest.trim_start().strip_prefix(')') {
            return Ok((Value::Composite(parts), after));
        }
        loop {
            let (part, after) = parse_value(rest.trim_start())?;
            parts.push(part);
            let after = after.trim_start();
            if let Some(after) = after.strip_prefix(',') {
                rest = after;
            } else if let Some(after) = after.strip_prefix(')') {
                return Ok((Value::Composite(parts), after));
            } else {
                return Err("unterminated composite");
            }
        }
    }
    let end = s.find([',', ')', '(']).unwrap_or(s.len());
    let (atom, rest) = s.split_at(end);
    let (tag, name) = atom.split_once(':').ok_or("missing `kind:` prefix")?;
    let name = name.trim();
    if name.is_empty() {
        return Err("empty name");
    }
    if name.contains(char::is_whitespace) {
        return Err("whitespace in name");
    }
    let value = match tag.trim() {
        "token" => Value::Token(name.into()),
        "secret" => Value::Secret(name.into()),
        "hash" => Value::HashOf(name.into()),
        "plain" => Value::Plain(name.into()),
        _ => return Err("unknown kind (expected token, secret, hash or plain)"),
    };
    Ok((value, rest))
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The atomic values a party holds. Composites are never stored; they are
/// producible when all their parts are.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeSet {
    atoms: BTreeSet<Value>,
}

impl KnowledgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a Value>) -> Self {
        let mut k = Self::new();
        for v in values {
            k.absorb(v);
        }
        k
    }

    /// Adds every atom of `value`; returns the atoms that were new.
    pub fn absorb(&mut self, value: &Value) -> Vec<Value> {
        value
            .atoms()
            .into_iter()
            .filter(|a| self.atoms.insert((*a).clone()))
            .cloned()
            .collect()
    }

    pub fn absorb_all(&mut self, other: &KnowledgeSet) -> Vec<Value> {
        other
            .atoms
            .iter()
            .filter(|a| self.atoms.insert((*a).clone()))
            .cloned()
            .collect()
    }

    pub fn contains(&self, value: &Value) -> bool {
        self.atoms.contains(value)
    }

    pub fn can_produce(&self, value: &Value) -> bool {
        match value {
            Value::Plain(_) => true,
            Value::Token(_) | Value::Secret(_) => self.atoms.contains(value),
            Value::HashOf(x) => {
                self.atoms.contains(value) || self.atoms.contains(&Value::Secret(x.clone()))
            }
            Value::Composite(parts) => parts.iter().all(|p| self.can_produce(p)),
        }
    }

    pub fn is_subset(&self, other: &KnowledgeSet) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Value> {
        self.atoms.iter()
    }

    pub fn secrets(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().filter_map(|v| match v {
            Value::Secret(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().filter_map(|v| match v {
            Value::Token(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trip() {
        let v = Value::Composite(vec![
            Value::token("a"),
            Value::hash_of("s"),
            Value::Composite(vec![Value::plain(3), Value::secret("s")]),
        ]);
        let text = v.to_string();
        assert_eq!(text, "(token:a,hash:s,(plain:3,secret:s))");
        assert_eq!(text.parse::<Value>().unwrap(), v);
        assert_eq!("()".parse::<Value>().unwrap(), Value::Composite(vec![]));
    }

    #[test]
    fn parse_errors() {
        assert!("s".parse::<Value>().is_err());
        assert!("coin:a".parse::<Value>().is_err());
        assert!("(token:a".parse::<Value>().is_err());
        assert!("token:a junk".parse::<Value>().is_err());
        assert!("secret:".parse::<Value>().is_err());
    }

    #[test]
    fn hash_is_one_way() {
        let k = KnowledgeSet::from_values(&[Value::hash_of("s")]);
        assert!(k.can_produce(&Value::hash_of("s")));
        assert!(!k.can_produce(&Value::secret("s")));

        let k = KnowledgeSet::from_values(&[Value::secret("s")]);
        assert!(k.can_produce(&Value::hash_of("s")));
        assert!(k.can_produce(&Value::plain("anything")));
        assert!(!k.can_produce(&Value::token("a")));
    }

    #[test]
    fn composites_project_into_atoms() {
        let mut k = KnowledgeSet::new();
        let learned = k.absorb(&Value::Composite(vec![Value::token("a"), Value::secret("s")]));
        assert_eq!(learned, vec![Value::token("a"), Value::secret("s")]);
        assert!(k.absorb(&Value::secret("s")).is_empty());
        assert!(k.can_produce(&Value::Composite(vec![Value::hash_of("s"), Value::token("a")])));
    }
}
