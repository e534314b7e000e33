//! Functional dependencies: closure, implication, minimal covers, 3NF
//! synthesis and the fold/unfold scheme derivation for prediction relations.

mod chase;
mod synthesis;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chase::{is_lossless, preserves_dependencies};
pub use synthesis::{RelationScheme, SchemeKind};

pub type AttrSet = BTreeSet<String>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("functional dependency needs a non-empty left and right side")]
    EmptySide,
    #[error("`{0}` is not a parameter")]
    NotAParameter(String),
    #[error("cyclic dependency among outputs: {}", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
}

/// Role of an attribute in a hypothesis FD schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrRole {
    Phenomenon,
    Hypothesis,
    Param,
    Dim,
    Output,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fd {
    pub lhs: AttrSet,
    pub rhs: AttrSet,
}

impl Fd {
    /// Builds `lhs -> rhs`, removing from the right side anything on the left.
    pub fn new<'a>(lhs: impl IntoIterator<Item = &'a str>, rhs: impl IntoIterator<Item = &'a str>) -> Self {
        let lhs: AttrSet = lhs.into_iter().map(str::to_string).collect();
        let rhs = rhs.into_iter().filter(|a| !lhs.contains(*a)).map(str::to_string).collect();
        Self { lhs, rhs }
    }

    pub fn from_sets(lhs: AttrSet, rhs: AttrSet) -> Self {
        let rhs = rhs.difference(&lhs).cloned().collect();
        Self { lhs, rhs }
    }

    pub fn is_trivial(&self) -> bool {
        self.rhs.is_empty()
    }
}

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &AttrSet| s.iter().cloned().collect::<Vec<_>>().join(" ");
        write!(f, "{} -> {}", join(&self.lhs), join(&self.rhs))
    }
}

/// A set of FDs over a declared attribute universe. Attributes keep their
/// declaration order, which fixes every tie-break downstream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FdSet {
    attrs: Vec<String>,
    roles: BTreeMap<String, AttrRole>,
    fds: Vec<Fd>,
    hypothesis: Option<u32>,
}

impl FdSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// A set over plain attributes without hypothesis roles.
    pub fn with_attrs<'a>(attrs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut s = Self::new();
        for a in attrs {
            s.declare(a, AttrRole::Other);
        }
        s
    }

    /// Declares an attribute; re-declaring updates its role only.
    pub fn declare(&mut self, attr: &str, role: AttrRole) {
        if self.roles.insert(attr.to_string(), role).is_none() {
            self.attrs.push(attr.to_string());
        }
    }

    pub fn set_hypothesis(&mut self, id: Option<u32>) {
        self.hypothesis = id;
    }

    pub fn hypothesis(&self) -> Option<u32> {
        self.hypothesis
    }

    pub fn insert(&mut self, fd: Fd) -> Result<(), FdError> {
        if fd.lhs.is_empty() {
            return Err(FdError::EmptySide);
        }
        self.check_known(fd.lhs.iter().chain(&fd.rhs))?;
        if fd.is_trivial() || self.fds.contains(&fd) {
            return Ok(());
        }
        self.fds.push(fd);
        Ok(())
    }

    /// Convenience for tests and tooling: `add(&["A"], &["B"])`.
    pub fn add(&mut self, lhs: &[&str], rhs: &[&str]) -> Result<(), FdError> {
        if rhs.is_empty() {
            return Err(FdError::EmptySide);
        }
        self.insert(Fd::new(lhs.iter().copied(), rhs.iter().copied()))
    }

    pub fn fds(&self) -> &[Fd] {
        &self.fds
    }

    pub fn attrs(&self) -> &[String] {
        &self.attrs
    }

    pub fn universe(&self) -> AttrSet {
        self.attrs.iter().cloned().collect()
    }

    pub fn role(&self, attr: &str) -> Option<AttrRole> {
        self.roles.get(attr).copied()
    }

    pub fn attrs_with_role(&self, role: AttrRole) -> Vec<String> {
        self.attrs.iter().filter(|a| self.roles[*a] == role).cloned().collect()
    }

    fn check_known<'a>(&self, attrs: impl IntoIterator<Item = &'a String>) -> Result<(), FdError> {
        for a in attrs {
            if !self.roles.contains_key(a) {
                return Err(FdError::UnknownAttribute(a.clone()));
            }
        }
        Ok(())
    }

    /// Same universe, different dependencies.
    pub(crate) fn with_fds(&self, fds: Vec<Fd>) -> FdSet {
        FdSet { attrs: self.attrs.clone(), roles: self.roles.clone(), fds, hypothesis: self.hypothesis }
    }

    /// Singleton-rhs form as a set, for order-insensitive comparison.
    pub fn normalized(&self) -> BTreeSet<(AttrSet, String)> {
        self.fds.iter().flat_map(|fd| fd.rhs.iter().map(move |a| (fd.lhs.clone(), a.clone()))).collect()
    }

    /// Attribute closure `x+`.
    pub fn closure(&self, x: &AttrSet) -> Result<AttrSet, FdError> {
        self.check_known(x)?;
        Ok(closure_of(&self.fds, x))
    }

    /// Whether `fd` follows from this set by Armstrong's axioms.
    pub fn implies(&self, fd: &Fd) -> Result<bool, FdError> {
        self.check_known(fd.lhs.iter().chain(&fd.rhs))?;
        Ok(fd.rhs.is_subset(&closure_of(&self.fds, &fd.lhs)))
    }

    /// Mutual implication of every FD.
    pub fn equivalent(&self, other: &FdSet) -> bool {
        self.fds.iter().all(|f| f.rhs.is_subset(&closure_of(&other.fds, &f.lhs)))
            && other.fds.iter().all(|f| f.rhs.is_subset(&closure_of(&self.fds, &f.lhs)))
    }

    /// Canonical cover: singleton right sides, no extraneous left attribute,
    /// no redundant FD. FDs are processed in insertion order.
    pub fn minimal_cover(&self) -> FdSet {
        let mut fds: Vec<Fd> = Vec::new();
        for fd in &self.fds {
            for a in &fd.rhs {
                let single = Fd::from_sets(fd.lhs.clone(), AttrSet::from([a.clone()]));
                if !fds.contains(&single) {
                    fds.push(single);
                }
            }
        }

        // Left-reduce against the full (current) set.
        for i in 0..fds.len() {
            let target = fds[i].rhs.iter().next().unwrap().clone();
            let ordered: Vec<String> = self.attrs.iter().filter(|a| fds[i].lhs.contains(*a)).cloned().collect();
            for attr in ordered {
                if fds[i].lhs.len() == 1 {
                    break;
                }
                let mut reduced = fds[i].lhs.clone();
                reduced.remove(&attr);
                if closure_of(&fds, &reduced).contains(&target) {
                    fds[i].lhs = reduced;
                }
            }
        }
        let mut seen = BTreeSet::new();
        fds.retain(|f| seen.insert(f.clone()));

        // Drop FDs implied by the rest.
        let mut i = 0;
        while i < fds.len() {
            let fd = fds.remove(i);
            if fd.rhs.is_subset(&closure_of(&fds, &fd.lhs)) {
                continue;
            }
            fds.insert(i, fd);
            i += 1;
        }
        self.with_fds(fds)
    }

    /// A minimal key of the whole universe, removing attributes in reverse
    /// declaration order so that earlier attributes are preferred.
    pub fn candidate_key(&self) -> AttrSet {
        let universe = self.universe();
        let mut key = universe.clone();
        for a in self.attrs.iter().rev() {
            let mut smaller = key.clone();
            smaller.remove(a);
            if closure_of(&self.fds, &smaller) == universe {
                key = smaller;
            }
        }
        key
    }
}

impl fmt::Display for FdSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order: BTreeMap<&String, usize> = self.attrs.iter().enumerate().map(|(i, a)| (a, i)).collect();
        let render = |s: &AttrSet| {
            let mut v: Vec<&String> = s.iter().collect();
            v.sort_by_key(|a| order.get(a).copied().unwrap_or(usize::MAX));
            v.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(" ")
        };
        f.write_str("{ ")?;
        for (i, fd) in self.fds.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} -> {}", render(&fd.lhs), render(&fd.rhs))?;
        }
        f.write_str(" }")
    }
}

pub(crate) fn closure_of(fds: &[Fd], x: &AttrSet) -> AttrSet {
    let mut out = x.clone();
    let mut used = vec![false; fds.len()];
    loop {
        let mut changed = false;
        for (i, fd) in fds.iter().enumerate() {
            if !used[i] && fd.lhs.is_subset(&out) {
                used[i] = true;
                for a in &fd.rhs {
                    changed |= out.insert(a.clone());
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

pub(crate) fn set(xs: &[&str]) -> AttrSet {
    xs.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sigma1() -> FdSet {
        let mut s = FdSet::new();
        s.declare("phi", AttrRole::Phenomenon);
        s.declare("upsilon", AttrRole::Hypothesis);
        for p in ["g", "v0", "s0"] {
            s.declare(p, AttrRole::Param);
        }
        s.declare("t", AttrRole::Dim);
        for o in ["a", "v", "s"] {
            s.declare(o, AttrRole::Output);
        }
        s.set_hypothesis(Some(1));
        s.add(&["phi"], &["g", "v0", "s0"]).unwrap();
        s.add(&["g", "upsilon"], &["a"]).unwrap();
        s.add(&["g", "v0", "t", "upsilon"], &["v"]).unwrap();
        s.add(&["g", "v0", "s0", "t", "upsilon"], &["s"]).unwrap();
        s
    }

    pub(crate) fn sigma2() -> FdSet {
        let mut s = FdSet::new();
        s.declare("phi", AttrRole::Phenomenon);
        s.declare("upsilon", AttrRole::Hypothesis);
        for p in ["g", "D", "s0"] {
            s.declare(p, AttrRole::Param);
        }
        s.declare("t", AttrRole::Dim);
        for o in ["a", "v", "s"] {
            s.declare(o, AttrRole::Output);
        }
        s.set_hypothesis(Some(2));
        s.add(&["phi"], &["g", "D", "s0"]).unwrap();
        s.add(&["upsilon"], &["a"]).unwrap();
        s.add(&["g", "D", "upsilon"], &["v"]).unwrap();
        s.add(&["g", "D", "s0", "t", "upsilon"], &["s"]).unwrap();
        s
    }

    #[test]
    fn closure_examples() {
        let s = sigma1();
        assert_eq!(s.closure(&set(&["phi", "upsilon", "t"])).unwrap(), set(&["phi", "upsilon", "t", "g", "v0", "s0", "a", "v", "s"]));
        assert_eq!(s.closure(&AttrSet::new()).unwrap(), AttrSet::new());
        assert_eq!(s.closure(&set(&["g", "upsilon"])).unwrap(), set(&["g", "upsilon", "a"]));
        assert_eq!(s.closure(&set(&["nope"])), Err(FdError::UnknownAttribute("nope".into())));
    }

    #[test]
    fn implication_examples() {
        let s = sigma1();
        assert!(s.implies(&Fd::new(["phi", "upsilon"], ["a"])).unwrap());
        assert!(!s.implies(&Fd::new(["t"], ["s"])).unwrap());
        assert!(s.implies(&Fd::new(["t", "s"], ["t", "s"])).unwrap());
    }

    #[test]
    fn minimal_cover_removes_transitive_fd() {
        let mut s = FdSet::with_attrs(["A", "B", "C"]);
        s.add(&["A"], &["B"]).unwrap();
        s.add(&["B"], &["C"]).unwrap();
        s.add(&["A"], &["C"]).unwrap();
        let m = s.minimal_cover();
        assert_eq!(m.normalized(), BTreeSet::from([(set(&["A"]), "B".into()), (set(&["B"]), "C".into())]));
        assert!(m.equivalent(&s));
    }

    #[test]
    fn minimal_cover_removes_extraneous_attribute() {
        let mut s = FdSet::with_attrs(["A", "B", "C"]);
        s.add(&["A", "B"], &["C"]).unwrap();
        s.add(&["A"], &["B"]).unwrap();
        let m = s.minimal_cover();
        assert_eq!(m.normalized(), BTreeSet::from([(set(&["A"]), "B".into()), (set(&["A"]), "C".into())]));
    }

    #[test]
    fn minimal_cover_of_free_fall_only_splits() {
        let s = sigma1();
        let m = s.minimal_cover();
        assert_eq!(m.normalized(), s.normalized());
        assert_eq!(m.fds().len(), 6);
    }

    #[test]
    fn trivial_and_unknown_fds() {
        let mut s = FdSet::with_attrs(["A", "B"]);
        s.add(&["A", "B"], &["A"]).unwrap();
        assert!(s.fds().is_empty());
        assert_eq!(s.add(&["A"], &["Z"]), Err(FdError::UnknownAttribute("Z".into())));
        assert_eq!(s.add(&[], &["A"]), Err(FdError::EmptySide));
    }

    #[test]
    fn candidate_key_of_free_fall() {
        assert_eq!(sigma1().candidate_key(), set(&["phi", "upsilon", "t"]));
    }
}
