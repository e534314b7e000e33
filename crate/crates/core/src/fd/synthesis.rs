use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{closure_of, AttrRole, AttrSet, Fd, FdError, FdSet};
use crate::relation::{PHI, UPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Descriptive,
    Input,
    Prediction,
    Factor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationScheme {
    pub name: String,
    pub attrs: AttrSet,
    pub key: AttrSet,
    pub kind: SchemeKind,
    /// For prediction schemes: the uncertain parameters the predicted value
    /// still depends on once certain parameters are folded into `phi`.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub uncertainty_deps: AttrSet,
}

impl RelationScheme {
    fn new(name: String, attrs: AttrSet, key: AttrSet, kind: SchemeKind) -> Self {
        Self { name, attrs, key, kind, uncertainty_deps: AttrSet::new() }
    }
}

impl fmt::Display for RelationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &AttrSet| s.iter().cloned().collect::<Vec<_>>().join(", ");
        write!(f, "{}({}) key ({})", self.name, join(&self.attrs), join(&self.key))?;
        if !self.uncertainty_deps.is_empty() {
            write!(f, " uncertain in {{{}}}", join(&self.uncertainty_deps))?;
        }
        Ok(())
    }
}

impl FdSet {
    fn classify(&self, attrs: &AttrSet, key: &AttrSet) -> SchemeKind {
        let role = |a: &String| self.role(a).unwrap_or(AttrRole::Other);
        if attrs.iter().any(|a| role(a) == AttrRole::Output) {
            SchemeKind::Prediction
        } else if key.iter().any(|a| role(a) == AttrRole::Phenomenon)
            && attrs.difference(key).all(|a| role(a) == AttrRole::Param)
            && attrs.len() > key.len()
        {
            SchemeKind::Input
        } else {
            SchemeKind::Descriptive
        }
    }

    /// Bernstein's 3NF synthesis.
    ///
    /// FDs of the minimal cover are grouped by equivalent left sides; each
    /// group yields one scheme keyed by its first left side. Schemes
    /// contained in another are dropped and, when no scheme holds a key of
    /// the universe, a key scheme is appended so the decomposition stays
    /// lossless.
    pub fn synthesize_3nf(&self) -> Vec<RelationScheme> {
        let cover = self.minimal_cover();
        let fds = cover.fds();
        let closures: Vec<AttrSet> = fds.iter().map(|f| closure_of(fds, &f.lhs)).collect();

        let mut groups: Vec<(AttrSet, AttrSet)> = Vec::new();
        let mut group_closure: Vec<AttrSet> = Vec::new();
        for (fd, cl) in fds.iter().zip(&closures) {
            let equivalent = groups.iter().zip(&group_closure).position(|((key, _), gc)| fd.lhs.is_subset(gc) && key.is_subset(cl));
            match equivalent {
                Some(g) => {
                    groups[g].1.extend(fd.lhs.iter().cloned());
                    groups[g].1.extend(fd.rhs.iter().cloned());
                }
                None => {
                    let attrs = fd.lhs.union(&fd.rhs).cloned().collect();
                    groups.push((fd.lhs.clone(), attrs));
                    group_closure.push(cl.clone());
                }
            }
        }

        // Drop schemes whose attributes are contained in another one.
        let mut kept: Vec<(AttrSet, AttrSet)> = Vec::new();
        for (i, (key, attrs)) in groups.iter().enumerate() {
            let covered = groups.iter().enumerate().any(|(j, (_, other))| j != i && attrs.is_subset(other) && (attrs != other || j < i));
            if !covered {
                kept.push((key.clone(), attrs.clone()));
            }
        }

        let universe = self.universe();
        let has_key = kept.iter().any(|(_, attrs)| closure_of(fds, attrs) == universe);
        if !has_key {
            let key = self.candidate_key();
            kept.push((key.clone(), key));
        }

        kept.into_iter()
            .enumerate()
            .map(|(i, (key, attrs))| {
                let kind = self.classify(&attrs, &key);
                RelationScheme::new(format!("R{}", i + 1), attrs, key, kind)
            })
            .collect()
    }

    /// Prediction scheme derivation for uncertain parameters.
    ///
    /// Fold: every output FD `L -> o` has its parameters replaced by `phi`
    /// through pseudo-transitivity with `phi -> params`, giving the scheme
    /// `(phi, upsilon, dims(o), o)`. Unfold: the closure of that key is
    /// recomputed with `phi` determining only `certain_params`; parameters
    /// of `L` it no longer reaches are the scheme's uncertainty deps.
    ///
    /// Returns `Y[Exp]`, one factor scheme per uncertain parameter and one
    /// prediction scheme per output, in declaration order.
    pub fn u_ptc(&self, certain_params: &AttrSet) -> Result<Vec<RelationScheme>, FdError> {
        let params: AttrSet = self.attrs_with_role(AttrRole::Param).into_iter().collect();
        let dims: AttrSet = self.attrs_with_role(AttrRole::Dim).into_iter().collect();
        let outputs = self.attrs_with_role(AttrRole::Output);
        if let Some(p) = certain_params.iter().find(|p| !params.contains(*p)) {
            return Err(FdError::NotAParameter(p.clone()));
        }

        // Direct lhs of each output, merged over all FDs that determine it.
        let mut direct: BTreeMap<&str, AttrSet> = BTreeMap::new();
        for fd in self.fds() {
            for o in fd.rhs.iter().filter(|a| self.role(a) == Some(AttrRole::Output)) {
                direct.entry(o.as_str()).or_default().extend(fd.lhs.iter().cloned());
            }
        }
        check_acyclic(&outputs, &direct, self)?;

        let prefix = match self.hypothesis() {
            Some(h) => format!("Y{h}"),
            None => "Y".to_string(),
        };

        // phi -> certain params only; every other FD is kept.
        let unfolded: Vec<Fd> = self
            .fds()
            .iter()
            .filter_map(|fd| {
                if fd.lhs.len() == 1 && fd.lhs.contains(PHI) {
                    let rhs: AttrSet = fd.rhs.iter().filter(|a| !params.contains(*a) || certain_params.contains(*a)).cloned().collect();
                    (!rhs.is_empty()).then(|| Fd::from_sets(fd.lhs.clone(), rhs))
                } else {
                    Some(fd.clone())
                }
            })
            .collect();

        let mut schemes = vec![RelationScheme::new(
            "Y[Exp]".to_string(),
            super::set(&[PHI, UPSILON]),
            super::set(&[PHI, UPSILON]),
            SchemeKind::Descriptive,
        )];
        for p in self.attrs_with_role(AttrRole::Param) {
            if !certain_params.contains(&p) {
                schemes.push(RelationScheme::new(format!("{prefix}[{p}]"), super::set(&[PHI, &p]), super::set(&[PHI]), SchemeKind::Factor));
            }
        }

        for o in &outputs {
            let Some(_) = direct.get(o.as_str()) else { continue };
            let expanded = expand_lhs(o, &direct, self);
            let mut key: AttrSet = expanded.intersection(&dims).cloned().collect();
            key.insert(PHI.to_string());
            key.insert(UPSILON.to_string());

            // Fold: phi stands in for every parameter of the lhs.
            let folded = Fd::from_sets(key.clone(), super::set(&[o]));
            debug_assert!(closure_of(self.fds(), &folded.lhs).contains(o.as_str()));

            // Unfold: what the key no longer reaches without phi -> uncertain params.
            let reach = closure_of(&unfolded, &key);
            let deps: AttrSet = expanded.intersection(&params).filter(|p| !reach.contains(*p)).cloned().collect();

            let mut attrs = key.clone();
            attrs.insert(o.clone());
            let mut scheme = RelationScheme::new(format!("{prefix}[{o}]"), attrs, key, SchemeKind::Prediction);
            scheme.uncertainty_deps = deps;
            schemes.push(scheme);
        }
        Ok(schemes)
    }
}

/// Lhs of `o` with referenced outputs replaced by their own lhs.
fn expand_lhs(o: &str, direct: &BTreeMap<&str, AttrSet>, sigma: &FdSet) -> AttrSet {
    let mut out = AttrSet::new();
    let mut stack = vec![o.to_string()];
    let mut seen = BTreeSet::new();
    while let Some(cur) = stack.pop() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        for a in direct.get(cur.as_str()).into_iter().flatten() {
            if sigma.role(a) == Some(AttrRole::Output) {
                stack.push(a.clone());
            } else {
                out.insert(a.clone());
            }
        }
    }
    out
}

fn check_acyclic(outputs: &[String], direct: &BTreeMap<&str, AttrSet>, sigma: &FdSet) -> Result<(), FdError> {
    fn visit(
        o: &str,
        direct: &BTreeMap<&str, AttrSet>,
        sigma: &FdSet,
        path: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), FdError> {
        if done.contains(o) {
            return Ok(());
        }
        if let Some(start) = path.iter().position(|p| p == o) {
            let mut cycle = path[start..].to_vec();
            cycle.push(o.to_string());
            return Err(FdError::CyclicDependency(cycle));
        }
        path.push(o.to_string());
        for a in direct.get(o).into_iter().flatten() {
            if sigma.role(a) == Some(AttrRole::Output) {
                visit(a, direct, sigma, path, done)?;
            }
        }
        path.pop();
        done.insert(o.to_string());
        Ok(())
    }
    let mut done = BTreeSet::new();
    for o in outputs {
        visit(o, direct, sigma, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}
