//! Probabilistic world-set algebra over [`URelation`]s.
//!
//! Only the operators the synthesis pipeline and the ranking queries need:
//! selection, projection, equi-join, union-all, grouping with counts,
//! `repair key`, `possible` and the `conf` aggregate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relation::{Attribute, Domain, Tuple, URelation, Value};
use crate::worldset::{Descriptor, VarId, WorldError, WorldTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("unknown attribute `{attr}` in {relation}")]
    UnknownAttribute { relation: String, attr: String },
    #[error("attribute `{0}` would appear twice in the join result")]
    DuplicateAttribute(String),
    #[error("union inputs have different schemas: {left} vs {right}")]
    SchemaMismatch { left: String, right: String },
    #[error("weight attribute `{attr}` is not numeric")]
    NonNumericWeight { attr: String },
    #[error("negative weight {weight} in key group {key}")]
    NegativeWeight { key: String, weight: f64 },
    #[error("all weights are zero in key group {key}")]
    ZeroTotalWeight { key: String },
    #[error("{relation} carries uncertain tuples; operation expects a certain relation")]
    UncertainInput { relation: String },
    #[error(transparent)]
    World(#[from] WorldError),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Const(Value),
    Attr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub attr: String,
    pub op: CmpOp,
    pub rhs: Operand,
}

/// A conjunction of comparisons; the empty conjunction is TRUE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub terms: Vec<Comparison>,
}

impl Predicate {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn eq(attr: impl Into<String>, value: Value) -> Self {
        Self::always().and(attr, CmpOp::Eq, Operand::Const(value))
    }

    pub fn and(mut self, attr: impl Into<String>, op: CmpOp, rhs: Operand) -> Self {
        self.terms.push(Comparison { attr: attr.into(), op, rhs });
        self
    }

    pub fn and_eq(self, attr: impl Into<String>, value: Value) -> Self {
        self.and(attr, CmpOp::Eq, Operand::Const(value))
    }
}

fn lookup(r: &URelation, attr: &str) -> Result<usize> {
    r.position(attr).ok_or_else(|| AlgebraError::UnknownAttribute { relation: r.name.clone(), attr: attr.to_string() })
}

/// Tuples satisfying `pred`; descriptors are unchanged.
pub fn select(r: &URelation, pred: &Predicate) -> Result<URelation> {
    enum Rhs<'a> {
        Const(&'a Value),
        Col(usize),
    }
    let compiled = pred
        .terms
        .iter()
        .map(|c| {
            let left = lookup(r, &c.attr)?;
            let rhs = match &c.rhs {
                Operand::Const(v) => Rhs::Const(v),
                Operand::Attr(a) => Rhs::Col(lookup(r, a)?),
            };
            Ok((left, c.op, rhs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = URelation::new(r.name.clone(), r.schema().to_vec());
    for t in r.tuples() {
        let keep = compiled.iter().all(|(left, op, rhs)| {
            let right = match rhs {
                Rhs::Const(v) => *v,
                Rhs::Col(i) => &t.values[*i],
            };
            op.holds(t.values[*left].cmp(right))
        });
        if keep {
            out.push(t.clone());
        }
    }
    Ok(out)
}

/// Restricts columns to `attrs`. With `dedup`, tuples equal in values and
/// descriptor collapse to one.
pub fn project(r: &URelation, attrs: &[&str], dedup: bool) -> Result<URelation> {
    let idx = attrs.iter().map(|a| lookup(r, a)).collect::<Result<Vec<_>>>()?;
    let schema = idx.iter().map(|&i| r.schema()[i].clone()).collect();
    let mut out = URelation::new(r.name.clone(), schema);
    let mut seen = BTreeSet::new();
    for t in r.tuples() {
        let values: Vec<Value> = idx.iter().map(|&i| t.values[i].clone()).collect();
        if dedup && !seen.insert((values.clone(), t.descriptor.clone())) {
            continue;
        }
        out.push(Tuple::new(values, t.descriptor.clone()));
    }
    Ok(out)
}

/// Equi-join on `on` (left attribute, right attribute) pairs. The result
/// carries the left schema followed by the right attributes that are not
/// join columns. Pairs whose merged descriptor is inconsistent are dropped.
pub fn join(l: &URelation, r: &URelation, on: &[(&str, &str)]) -> Result<URelation> {
    let pairs = on.iter().map(|(a, b)| Ok((lookup(l, a)?, lookup(r, b)?))).collect::<Result<Vec<_>>>()?;
    let right_keys: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    let right_keep: Vec<usize> = (0..r.arity()).filter(|i| !right_keys.contains(i)).collect();

    let mut schema = l.schema().to_vec();
    for &i in &right_keep {
        let attr = &r.schema()[i];
        if schema.iter().any(|a| a.name == attr.name) {
            return Err(AlgebraError::DuplicateAttribute(attr.name.clone()));
        }
        schema.push(attr.clone());
    }

    // Hash the right side on its join key.
    let mut index: BTreeMap<Vec<&Value>, Vec<&Tuple>> = BTreeMap::new();
    for t in r.tuples() {
        let key = pairs.iter().map(|p| &t.values[p.1]).collect();
        index.entry(key).or_default().push(t);
    }

    let mut out = URelation::new(format!("{}_join_{}", l.name, r.name), schema);
    for lt in l.tuples() {
        let key: Vec<&Value> = pairs.iter().map(|p| &lt.values[p.0]).collect();
        let Some(matches) = index.get(&key) else { continue };
        for rt in matches {
            let descriptor = lt.descriptor.union(&rt.descriptor);
            if !descriptor.is_consistent() {
                continue;
            }
            let mut values = lt.values.clone();
            values.extend(right_keep.iter().map(|&i| rt.values[i].clone()));
            out.push(Tuple::new(values, descriptor));
        }
    }
    Ok(out)
}

/// Concatenation of relations with identical schemas, without dedup.
pub fn union_all(name: impl Into<String>, rs: &[&URelation]) -> Result<URelation> {
    let Some(first) = rs.first() else {
        return Ok(URelation::new(name, Vec::new()));
    };
    let mut out = URelation::new(name, first.schema().to_vec());
    for r in rs {
        if r.schema() != first.schema() {
            let names = |r: &URelation| r.attribute_names().collect::<Vec<_>>().join(",");
            return Err(AlgebraError::SchemaMismatch {
                left: format!("{}({})", first.name, names(first)),
                right: format!("{}({})", r.name, names(r)),
            });
        }
        for t in r.tuples() {
            out.push(t.clone());
        }
    }
    Ok(out)
}

fn require_certain(r: &URelation) -> Result<()> {
    if r.tuples().iter().any(|t| !t.descriptor.is_certain()) {
        return Err(AlgebraError::UncertainInput { relation: r.name.clone() });
    }
    Ok(())
}

/// `select attrs, count(*) as count_attr from r group by attrs`, ordered by
/// the group values.
pub fn group_count(r: &URelation, attrs: &[&str], count_attr: &str) -> Result<URelation> {
    require_certain(r)?;
    let idx = attrs.iter().map(|a| lookup(r, a)).collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
    for t in r.tuples() {
        *groups.entry(idx.iter().map(|&i| t.values[i].clone()).collect()).or_default() += 1;
    }
    let mut schema: Vec<Attribute> = idx.iter().map(|&i| r.schema()[i].clone()).collect();
    schema.push(Attribute::numeric(count_attr));
    let mut out = URelation::new(r.name.clone(), schema);
    for (mut values, n) in groups {
        values.push(Value::num(n as f64));
        out.push(Tuple::certain(values));
    }
    Ok(out)
}

/// What to do with zero-weight alternatives inside a key group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroWeight {
    /// Keep the alternative at marginal 0; `possible` filters it.
    #[default]
    Keep,
    /// Drop the alternative before the variable is registered.
    Drop,
}

/// Provenance of one variable created by [`repair_key`]: the key group it
/// repairs and, per value index (1-based, position `i - 1`), the tuple
/// values of that alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairedVariable {
    pub var: VarId,
    pub key: Vec<Value>,
    pub alternatives: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub relation: URelation,
    pub variables: Vec<RepairedVariable>,
}

/// `repair key <key> in r weight by <weight_attr>`.
///
/// Every key group with more than one tuple receives a fresh variable whose
/// marginals are the normalized weights; tuple `i` of the group gets the
/// descriptor `{x -> i}`. Singleton groups stay certain. Groups are
/// processed in ascending key order and the weight column is dropped.
pub fn repair_key(r: &URelation, key: &[&str], weight_attr: &str, world: &mut WorldTable, zero: ZeroWeight) -> Result<Repair> {
    require_certain(r)?;
    let key_idx = key.iter().map(|a| lookup(r, a)).collect::<Result<Vec<_>>>()?;
    let w_idx = lookup(r, weight_attr)?;
    if r.schema()[w_idx].domain == Domain::Text {
        return Err(AlgebraError::NonNumericWeight { attr: weight_attr.to_string() });
    }
    let keep: Vec<usize> = (0..r.arity()).filter(|&i| i != w_idx).collect();

    let mut groups: BTreeMap<Vec<Value>, Vec<(Vec<Value>, f64)>> = BTreeMap::new();
    for t in r.tuples() {
        let k: Vec<Value> = key_idx.iter().map(|&i| t.values[i].clone()).collect();
        let weight = t.values[w_idx].as_f64().ok_or_else(|| AlgebraError::NonNumericWeight { attr: weight_attr.to_string() })?;
        if weight < 0.0 || !weight.is_finite() {
            return Err(AlgebraError::NegativeWeight { key: render_key(&k), weight });
        }
        let values = keep.iter().map(|&i| t.values[i].clone()).collect();
        groups.entry(k).or_default().push((values, weight));
    }

    let schema = keep.iter().map(|&i| r.schema()[i].clone()).collect();
    let mut out = URelation::new(r.name.clone(), schema);
    let mut variables = Vec::new();
    for (k, mut members) in groups {
        if members.iter().all(|m| m.1 == 0.0) {
            return Err(AlgebraError::ZeroTotalWeight { key: render_key(&k) });
        }
        if zero == ZeroWeight::Drop {
            members.retain(|m| m.1 > 0.0);
        }
        if members.len() == 1 {
            out.push(Tuple::certain(members.pop().unwrap().0));
            continue;
        }
        let weights: Vec<f64> = members.iter().map(|m| m.1).collect();
        let var = world.register_variable(weights.len(), &weights)?;
        let mut alternatives = Vec::with_capacity(members.len());
        for (i, (values, _)) in members.into_iter().enumerate() {
            alternatives.push(values.clone());
            out.push(Tuple::new(values, Descriptor::single(var, i as u32 + 1)));
        }
        variables.push(RepairedVariable { var, key: k, alternatives });
    }
    Ok(Repair { relation: out, variables })
}

fn render_key(k: &[Value]) -> String {
    let parts: Vec<String> = k.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

/// Tuples holding in at least one world of positive probability.
pub fn possible(r: &URelation, world: &WorldTable) -> URelation {
    let mut out = URelation::new(r.name.clone(), r.schema().to_vec());
    for t in r.tuples() {
        if matches!(world.descriptor_probability(&t.descriptor), Ok(p) if p > 0.0) {
            out.push(t.clone());
        }
    }
    out
}

/// `select group_by, conf() from r group by group_by`: the exact probability
/// that some tuple of each group is present, in ascending group order.
pub fn conf(r: &URelation, group_by: &[&str], world: &WorldTable) -> Result<Vec<(Vec<Value>, f64)>> {
    let idx = group_by.iter().map(|a| lookup(r, a)).collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<Vec<Value>, Vec<Descriptor>> = BTreeMap::new();
    for t in r.tuples() {
        groups.entry(idx.iter().map(|&i| t.values[i].clone()).collect()).or_default().push(t.descriptor.clone());
    }
    groups.into_iter().map(|(k, ds)| Ok((k, world.event_probability(&ds)?))).collect()
}
