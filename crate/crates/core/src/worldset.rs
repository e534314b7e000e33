//! Discrete random variables, the world table, and ws-descriptors.
//!
//! A [`WorldTable`] registers independent discrete variables with their
//! marginal distributions. A [`Descriptor`] is a conjunction of
//! `variable = value-index` assignments and denotes the set of worlds in
//! which a tuple is present. Value indices are 1-based, as in `x1 -> 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the number of worlds [`WorldTable::enumerate_worlds`] will produce.
pub const DEFAULT_MAX_WORLDS: u64 = 1_000_000;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("variable domain must not be empty")]
    EmptyDomain,
    #[error("expected {expected} weights, got {actual}")]
    WeightCountMismatch { expected: usize, actual: usize },
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("all weights are zero")]
    ZeroTotalWeight,
    #[error("descriptor {0} assigns two values to one variable")]
    InconsistentDescriptor(Descriptor),
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("value index {index} out of range for {var}")]
    ValueOutOfRange { var: VarId, index: u32 },
    #[error("no variables to enumerate")]
    EmptyVarSet,
    #[error("{worlds} worlds exceed the enumeration bound of {bound}")]
    DomainTooLarge { worlds: u128, bound: u64 },
}

/// Identifier of a discrete random variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// One `variable -> value-index` pair of a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub var: VarId,
    pub value: u32,
}

impl Assignment {
    pub fn new(var: VarId, value: u32) -> Self {
        Self { var, value }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.var, self.value)
    }
}

/// A world-set descriptor: a conjunction of assignments kept sorted and
/// deduplicated. It may be inconsistent (two values for one variable), in
/// which case it denotes the empty world set.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Descriptor {
    assignments: Vec<Assignment>,
}

impl Descriptor {
    /// The empty descriptor: the certain event.
    pub fn certain() -> Self {
        Self::default()
    }

    pub fn new(assignments: impl IntoIterator<Item = Assignment>) -> Self {
        let mut assignments: Vec<Assignment> = assignments.into_iter().collect();
        assignments.sort_unstable();
        assignments.dedup();
        Self { assignments }
    }

    pub fn single(var: VarId, value: u32) -> Self {
        Self { assignments: vec![Assignment::new(var, value)] }
    }

    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        Self::new(pairs.iter().map(|&(v, i)| Assignment::new(VarId(v), i)))
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn is_certain(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        self.assignments.windows(2).all(|w| w[0].var != w[1].var)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.assignments.iter().map(|a| a.var)
    }

    /// Value assigned to `var`, if any. Meaningful for consistent descriptors.
    pub fn value_of(&self, var: VarId) -> Option<u32> {
        self.assignments.iter().find(|a| a.var == var).map(|a| a.value)
    }

    /// Conjunction of two descriptors. The result may be inconsistent.
    pub fn union(&self, other: &Descriptor) -> Descriptor {
        Descriptor::new(self.assignments.iter().chain(&other.assignments).copied())
    }

    /// True when no world satisfies both descriptors.
    pub fn excludes(&self, other: &Descriptor) -> bool {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.assignments, &other.assignments);
        while i < a.len() && j < b.len() {
            match a[i].var.cmp(&b[j].var) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a[i].value != b[j].value {
                        return true;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        false
    }

    /// Whether a total assignment (as a lookup) satisfies this descriptor.
    pub fn holds_in(&self, world: &BTreeMap<VarId, u32>) -> bool {
        self.assignments.iter().all(|a| world.get(&a.var) == Some(&a.value))
    }

    /// Splits the descriptor into the assignments on `vars` and the rest.
    pub fn partition_by(&self, vars: &BTreeSet<VarId>) -> (Descriptor, Descriptor) {
        let (inside, outside): (Vec<_>, Vec<_>) = self.assignments.iter().partition(|a| vars.contains(&a.var));
        (Descriptor { assignments: inside }, Descriptor { assignments: outside })
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<Assignment> for Descriptor {
    fn from_iter<T: IntoIterator<Item = Assignment>>(iter: T) -> Self {
        Descriptor::new(iter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    marginals: Vec<f64>,
    /// Set for variables created by posterior write-back.
    compound: bool,
}

impl Variable {
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn domain_size(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_compound(&self) -> bool {
        self.compound
    }

    pub fn marginal(&self, index: u32) -> Option<f64> {
        index.checked_sub(1).and_then(|i| self.marginals.get(i as usize)).copied()
    }
}

/// Registry of independent discrete variables and their marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldTable {
    vars: BTreeMap<VarId, Variable>,
    next_id: u32,
    max_worlds: u64,
}

impl Default for WorldTable {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldTable {
    pub fn new() -> Self {
        Self::with_max_worlds(DEFAULT_MAX_WORLDS)
    }

    pub fn with_max_worlds(max_worlds: u64) -> Self {
        Self { vars: BTreeMap::new(), next_id: 1, max_worlds }
    }

    pub fn max_worlds(&self) -> u64 {
        self.max_worlds
    }

    /// Registers a fresh variable; `weights` are normalized into marginals.
    pub fn register_variable(&mut self, domain_size: usize, weights: &[f64]) -> Result<VarId, WorldError> {
        self.register(domain_size, weights, false)
    }

    pub(crate) fn register_compound(&mut self, weights: &[f64]) -> Result<VarId, WorldError> {
        self.register(weights.len(), weights, true)
    }

    fn register(&mut self, domain_size: usize, weights: &[f64], compound: bool) -> Result<VarId, WorldError> {
        if domain_size == 0 {
            return Err(WorldError::EmptyDomain);
        }
        if weights.len() != domain_size {
            return Err(WorldError::WeightCountMismatch { expected: domain_size, actual: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WorldError::InvalidWeight);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(WorldError::ZeroTotalWeight);
        }
        let id = VarId(self.next_id);
        self.next_id += 1;
        self.vars.insert(id, Variable { marginals: weights.iter().map(|w| w / total).collect(), compound });
        Ok(id)
    }

    /// Removes a variable. Its id is never handed out again.
    pub(crate) fn retire(&mut self, var: VarId) -> Option<Variable> {
        self.vars.remove(&var)
    }

    pub fn variable(&self, var: VarId) -> Option<&Variable> {
        self.vars.get(&var)
    }

    pub fn variables(&self) -> impl Iterator<Item = (VarId, &Variable)> {
        self.vars.iter().map(|(k, v)| (*k, v))
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.vars.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn marginal(&self, a: Assignment) -> Result<f64, WorldError> {
        let var = self.vars.get(&a.var).ok_or(WorldError::UnknownVariable(a.var))?;
        var.marginal(a.value).ok_or(WorldError::ValueOutOfRange { var: a.var, index: a.value })
    }

    /// Checks that every marginal is in [0,1] and each variable sums to 1.
    pub fn is_normalized(&self) -> bool {
        self.vars.values().all(|v| {
            v.marginals.iter().all(|p| (0.0..=1.0).contains(p)) && (v.marginals.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL
        })
    }

    /// Product of the marginals of the descriptor's assignments.
    pub fn descriptor_probability(&self, d: &Descriptor) -> Result<f64, WorldError> {
        if !d.is_consistent() {
            return Err(WorldError::InconsistentDescriptor(d.clone()));
        }
        d.assignments().iter().try_fold(1.0, |acc, a| Ok(acc * self.marginal(*a)?))
    }

    /// Exact probability of the disjunction of `ds`.
    pub fn event_probability(&self, ds: &[Descriptor]) -> Result<f64, WorldError> {
        for d in ds {
            if !d.is_consistent() {
                return Err(WorldError::InconsistentDescriptor(d.clone()));
            }
            for a in d.assignments() {
                self.marginal(*a)?;
            }
        }
        match ds {
            [] => Ok(0.0),
            [d] => self.descriptor_probability(d),
            _ if pairwise_exclusive(ds) => ds.iter().map(|d| self.descriptor_probability(d)).sum(),
            _ => {
                let mut clauses: Vec<Descriptor> = ds.to_vec();
                clauses.sort_unstable();
                clauses.dedup();
                Ok(self.dnf_probability(clauses))
            }
        }
    }

    /// Exact DNF probability by Shannon expansion with independent-component
    /// splitting. Inputs are consistent and fully validated.
    fn dnf_probability(&self, mut clauses: Vec<Descriptor>) -> f64 {
        if clauses.is_empty() {
            return 0.0;
        }
        if clauses.iter().any(Descriptor::is_certain) {
            return 1.0;
        }
        if clauses.len() == 1 {
            return self.descriptor_probability(&clauses[0]).unwrap_or(0.0);
        }
        if pairwise_exclusive(&clauses) {
            return clauses.iter().map(|d| self.descriptor_probability(d).unwrap_or(0.0)).sum();
        }

        let components = var_components(&clauses);
        if components.len() > 1 {
            // Disjoint variable sets make the component events independent.
            let none = components.into_iter().fold(1.0, |acc, comp| {
                let part: Vec<Descriptor> = comp.into_iter().map(|i| clauses[i].clone()).collect();
                acc * (1.0 - self.dnf_probability(part))
            });
            return 1.0 - none;
        }

        // Branch on the most frequently mentioned variable.
        let mut counts: BTreeMap<VarId, usize> = BTreeMap::new();
        for d in &clauses {
            for v in d.vars() {
                *counts.entry(v).or_default() += 1;
            }
        }
        let pivot =
            counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(v, _)| *v).expect("non-certain clauses mention variables");
        let marginals = self.vars[&pivot].marginals.clone();

        clauses.sort_unstable();
        let mut total = 0.0;
        for (i, p) in marginals.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let value = i as u32 + 1;
            let mut branch: Vec<Descriptor> = Vec::with_capacity(clauses.len());
            for d in &clauses {
                match d.value_of(pivot) {
                    Some(v) if v != value => {}
                    Some(_) => branch.push(Descriptor { assignments: d.assignments.iter().filter(|a| a.var != pivot).copied().collect() }),
                    None => branch.push(d.clone()),
                }
            }
            total += p * self.dnf_probability(branch);
        }
        total
    }

    /// All total assignments of `vars` with their probabilities, in
    /// lexicographic order of value indices (first variable slowest).
    pub fn enumerate_worlds(&self, vars: &BTreeSet<VarId>) -> Result<Vec<(Vec<Assignment>, f64)>, WorldError> {
        if vars.is_empty() {
            return Err(WorldError::EmptyVarSet);
        }
        let mut domains = Vec::with_capacity(vars.len());
        let mut worlds: u128 = 1;
        for v in vars {
            let var = self.vars.get(v).ok_or(WorldError::UnknownVariable(*v))?;
            worlds = worlds.saturating_mul(var.domain_size() as u128);
            domains.push((*v, var.marginals.as_slice()));
        }
        if worlds > self.max_worlds as u128 {
            return Err(WorldError::DomainTooLarge { worlds, bound: self.max_worlds });
        }
        let mut out = Vec::with_capacity(worlds as usize);
        let mut idx = vec![0usize; domains.len()];
        loop {
            let mut p = 1.0;
            let mut world = Vec::with_capacity(domains.len());
            for (k, (v, m)) in domains.iter().enumerate() {
                p *= m[idx[k]];
                world.push(Assignment::new(*v, idx[k] as u32 + 1));
            }
            out.push((world, p));
            // Odometer increment, last variable fastest.
            let mut k = domains.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

pub(crate) fn pairwise_exclusive(ds: &[Descriptor]) -> bool {
    ds.iter().enumerate().all(|(i, a)| ds[i + 1..].iter().all(|b| a.excludes(b)))
}

/// Groups clause indices into connected components of shared variables.
fn var_components(clauses: &[Descriptor]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..clauses.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: BTreeMap<VarId, usize> = BTreeMap::new();
    for (i, d) in clauses.iter().enumerate() {
        for v in d.vars() {
            match owner.get(&v) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..clauses.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}
