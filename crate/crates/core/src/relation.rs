//! Attribute values, schemas and U-relations.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::worldset::{Descriptor, VarId, WorldTable};

/// Attribute name of the phenomenon id.
pub const PHI: &str = "phi";
/// Attribute name of the hypothesis id.
pub const UPSILON: &str = "upsilon";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Id,
    Numeric,
    Text,
}

/// A single attribute value.
///
/// Ordering and equality are total: ids and numbers compare numerically
/// with each other, and numbers use IEEE total order after `-0.0` is folded
/// into `0.0` on construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Id(u64),
    Num(f64),
    Text(String),
}

impl Value {
    pub fn num(x: f64) -> Self {
        Value::Num(if x == 0.0 { 0.0 } else { x })
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Id(i) => Some(*i as f64),
            Value::Num(x) => Some(*x),
            Value::Text(_) => None,
        }
    }

    pub fn as_id(&self) -> Option<u64> {
        match self {
            Value::Id(i) => Some(*i),
            Value::Num(x) if x.fract() == 0.0 && *x >= 0.0 => Some(*x as u64),
            _ => None,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Value::Id(_) => Domain::Id,
            Value::Num(_) => Domain::Numeric,
            Value::Text(_) => Domain::Text,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Id(a), Value::Id(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Text(_), _) => Ordering::Greater,
            (_, Value::Text(_)) => Ordering::Less,
            (a, b) => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x.total_cmp(&y)
            }
        }
    }
}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Value::Text(s) => {
                1u8.hash(state);
                s.hash(state);
            }
            other => {
                0u8.hash(state);
                other.as_f64().unwrap().to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Id(i) => write!(f, "{i}"),
            Value::Num(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub domain: Domain,
}

impl Attribute {
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        Self { name: name.into(), domain }
    }

    pub fn id(name: impl Into<String>) -> Self {
        Self::new(name, Domain::Id)
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, Domain::Numeric)
    }

    pub fn text(name: impl Into<String>) -> Self {
        Self::new(name, Domain::Text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub values: Vec<Value>,
    pub descriptor: Descriptor,
}

impl Tuple {
    pub fn new(values: Vec<Value>, descriptor: Descriptor) -> Self {
        Self { values, descriptor }
    }

    pub fn certain(values: Vec<Value>) -> Self {
        Self::new(values, Descriptor::certain())
    }
}

/// A relation whose tuples carry world-set descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct URelation {
    pub name: String,
    schema: Vec<Attribute>,
    tuples: Vec<Tuple>,
}

impl URelation {
    pub fn new(name: impl Into<String>, schema: Vec<Attribute>) -> Self {
        Self { name: name.into(), schema, tuples: Vec::new() }
    }

    pub fn schema(&self) -> &[Attribute] {
        &self.schema
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.schema.iter().position(|a| a.name == attr)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.schema.iter().map(|a| a.name.as_str())
    }

    /// Appends a tuple. Panics if the arity does not match the schema.
    pub fn push(&mut self, tuple: Tuple) {
        assert_eq!(tuple.values.len(), self.schema.len(), "tuple arity must match schema of {}", self.name);
        self.tuples.push(tuple);
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub(crate) fn tuples_mut(&mut self) -> &mut Vec<Tuple> {
        &mut self.tuples
    }

    pub fn referenced_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.tuples.iter().flat_map(|t| t.descriptor.vars())
    }

    /// Every tuple has the schema's arity and only mentions registered variables.
    pub fn is_well_formed(&self, world: &WorldTable) -> bool {
        self.tuples.iter().all(|t| t.values.len() == self.schema.len() && t.descriptor.vars().all(|v| world.contains(v)))
    }
}

impl fmt::Display for URelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.attribute_names().collect();
        writeln!(f, "{} | condition | {}", self.name, names.join(" | "))?;
        for t in &self.tuples {
            let vals: Vec<String> = t.values.iter().map(ToString::to_string).collect();
            writeln!(f, "  {} | {}", t.descriptor, vals.join(" | "))?;
        }
        Ok(())
    }
}
