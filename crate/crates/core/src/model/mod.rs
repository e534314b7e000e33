//! Hypothesis models: parsing, FD extraction and evaluation.
//!
//! A model file declares parameters, physical dimensions and output
//! equations:
//!
//! ```text
//! hypothesis "Law of free fall" {
//!     id = 1;
//!     param g, v0, s0;
//!     dim t;
//!     out a = -g;
//!     out v = -g * t + v0;
//!     out s = -(g / 2) * t^2 + v0 * t + s0;
//! }
//! ```

mod ast;
mod eval;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{BinOp, Expr};
pub use eval::{CompiledModel, EvalError, EvalRow, EvalTable};
pub use parser::parse_expr;

use crate::fd::{AttrRole, Fd, FdSet};
use crate::relation::{PHI, UPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("exponent at {line}:{col} is not a constant")]
    NonConstantExponent { line: usize, col: usize },
    #[error("output `{output}` references undeclared variable `{name}`")]
    UndeclaredVariable { output: String, name: String },
    #[error("cyclic output definition: {}", .0.join(" -> "))]
    CyclicOutputDefinition(Vec<String>),
    #[error("name `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("name `{0}` is reserved")]
    ReservedName(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Default)]
pub(crate) struct RawModel {
    pub name: String,
    pub id: Option<u32>,
    pub params: Vec<String>,
    pub dims: Vec<String>,
    pub outputs: Vec<Output>,
    pub positions: BTreeMap<String, (usize, usize)>,
}

/// A parsed and validated hypothesis model. Serializes as its source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct HypothesisModel {
    name: String,
    id: Option<u32>,
    params: Vec<String>,
    dims: Vec<String>,
    outputs: Vec<Output>,
    /// Output indices in an order where referenced outputs come first.
    order: Vec<usize>,
}

impl HypothesisModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Explicit `id = N;` clause, if present.
    pub fn id(&self) -> Option<u32> {
        self.id
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    pub fn output(&self, name: &str) -> Option<&Output> {
        self.outputs.iter().find(|o| o.name == name)
    }

    pub fn evaluation_order(&self) -> &[usize] {
        &self.order
    }

    /// Params and dims transitively reachable from `output` through
    /// referenced outputs.
    pub fn reachable_inputs(&self, output: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut params = BTreeSet::new();
        let mut dims = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![output.to_string()];
        while let Some(o) = stack.pop() {
            if !seen.insert(o.clone()) {
                continue;
            }
            let Some(out) = self.output(&o) else { continue };
            for v in out.expr.free_vars() {
                if self.params.contains(&v) {
                    params.insert(v);
                } else if self.dims.contains(&v) {
                    dims.insert(v);
                } else {
                    stack.push(v);
                }
            }
        }
        (params, dims)
    }

    /// Source text that parses back to an identical model.
    pub fn pretty_print(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hypothesis \"{}\" {{", self.name);
        if let Some(id) = self.id {
            let _ = writeln!(s, "    id = {id};");
        }
        if !self.params.is_empty() {
            let _ = writeln!(s, "    param {};", self.params.join(", "));
        }
        if !self.dims.is_empty() {
            let _ = writeln!(s, "    dim {};", self.dims.join(", "));
        }
        for o in &self.outputs {
            let _ = writeln!(s, "    out {} = {};", o.name, o.expr);
        }
        s.push_str("}\n");
        s
    }

    pub fn compile(&self) -> CompiledModel {
        CompiledModel::new(self)
    }

    /// Evaluates every output at each grid point.
    pub fn evaluate(&self, params: &BTreeMap<String, f64>, grid: &[BTreeMap<String, f64>]) -> Result<EvalTable, EvalError> {
        self.compile().evaluate(params, grid)
    }

    /// The model's FD schema: `phi -> params` plus, for every output `o`,
    /// `params(o) dims(o) upsilon -> o`.
    pub fn extract_fds(&self) -> FdSet {
        let mut sigma = FdSet::new();
        sigma.declare(PHI, AttrRole::Phenomenon);
        sigma.declare(UPSILON, AttrRole::Hypothesis);
        for p in &self.params {
            sigma.declare(p, AttrRole::Param);
        }
        for d in &self.dims {
            sigma.declare(d, AttrRole::Dim);
        }
        for o in &self.outputs {
            sigma.declare(&o.name, AttrRole::Output);
        }
        sigma.set_hypothesis(self.id);
        if !self.params.is_empty() {
            sigma.insert(Fd::new([PHI], self.params.iter().map(String::as_str))).expect("declared attributes");
        }
        for o in &self.outputs {
            let (params, dims) = self.reachable_inputs(&o.name);
            let lhs = params.iter().chain(&dims).map(String::as_str).chain([UPSILON]);
            sigma.insert(Fd::new(lhs, [o.name.as_str()])).expect("declared attributes");
        }
        sigma
    }
}

impl From<HypothesisModel> for String {
    fn from(m: HypothesisModel) -> String {
        m.pretty_print()
    }
}

impl TryFrom<String> for HypothesisModel {
    type Error = ModelError;

    fn try_from(src: String) -> Result<Self, ModelError> {
        parse_model(&src)
    }
}

const RESERVED: [&str; 3] = [PHI, UPSILON, "tid"];

fn validate(raw: RawModel) -> Result<HypothesisModel, ModelError> {
    let mut declared = BTreeSet::new();
    let names = raw.params.iter().chain(&raw.dims).chain(raw.outputs.iter().map(|o| &o.name));
    for n in names {
        if RESERVED.contains(&n.as_str()) {
            return Err(ModelError::ReservedName(n.clone()));
        }
        if !declared.insert(n.clone()) {
            return Err(ModelError::DuplicateName(n.clone()));
        }
    }
    for o in &raw.outputs {
        if let Some(name) = o.expr.free_vars().into_iter().find(|v| !declared.contains(v)) {
            return Err(ModelError::UndeclaredVariable { output: o.name.clone(), name });
        }
    }
    let order = topo_order(&raw.outputs)?;
    Ok(HypothesisModel { name: raw.name, id: raw.id, params: raw.params, dims: raw.dims, outputs: raw.outputs, order })
}

/// Dependency order of outputs, preferring declaration order; rejects cycles.
fn topo_order(outputs: &[Output]) -> Result<Vec<usize>, ModelError> {
    let index: BTreeMap<&str, usize> = outputs.iter().enumerate().map(|(i, o)| (o.name.as_str(), i)).collect();
    let deps: Vec<Vec<usize>> =
        outputs.iter().map(|o| o.expr.free_vars().iter().filter_map(|v| index.get(v.as_str()).copied()).collect()).collect();

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        i: usize,
        deps: &[Vec<usize>],
        marks: &mut [Mark],
        path: &mut Vec<usize>,
        order: &mut Vec<usize>,
        outputs: &[Output],
    ) -> Result<(), ModelError> {
        match marks[i] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = path.iter().position(|&p| p == i).unwrap();
                let mut cycle: Vec<String> = path[start..].iter().map(|&p| outputs[p].name.clone()).collect();
                cycle.push(outputs[i].name.clone());
                return Err(ModelError::CyclicOutputDefinition(cycle));
            }
            Mark::New => {}
        }
        marks[i] = Mark::Active;
        path.push(i);
        for &d in &deps[i] {
            visit(d, deps, marks, path, order, outputs)?;
        }
        path.pop();
        marks[i] = Mark::Done;
        order.push(i);
        Ok(())
    }

    let mut marks = vec![Mark::New; outputs.len()];
    let mut order = Vec::with_capacity(outputs.len());
    for i in 0..outputs.len() {
        visit(i, &deps, &mut marks, &mut Vec::new(), &mut order, outputs)?;
    }
    Ok(order)
}

/// Parses and validates model source text.
pub fn parse_model(src: &str) -> Result<HypothesisModel, ModelError> {
    validate(parser::parse_raw(src)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H1: &str = r#"
hypothesis "Law of free fall" {
    id = 1;
    param g, v0, s0;
    dim t;
    out a = -g;
    out v = -g * t + v0;
    out s = -(g / 2) * t^2 + v0 * t + s0;
}
"#;

    const H2: &str = r#"
hypothesis "Stokes' law" {
    id = 2;
    param g, D, s0;
    dim t;
    out a = 0;
    out v = -sqrt(g * D / 4.6e-4);
    out s = -t * sqrt(g * D / 4.6e-4) + s0;
}
"#;

    const H3: &str = r#"
hypothesis "Velocity-squared law" {
    id = 3;
    param g, D, s0;
    dim t;
    out a = 0;
    out v = -g * D^2 / 3.29e-6;
    out s = -(g * D^2 / 3.29e-6) * t + s0;
}
"#;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn grid(ts: &[f64]) -> Vec<BTreeMap<String, f64>> {
        ts.iter().map(|t| BTreeMap::from([("t".to_string(), *t)])).collect()
    }

    fn pv(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_free_fall() {
        let m = parse_model(H1).unwrap();
        assert_eq!(m.name(), "Law of free fall");
        assert_eq!(m.id(), Some(1));
        assert_eq!(m.params(), &["g", "v0", "s0"]);
        assert_eq!(m.dims(), &["t"]);
        let outs: Vec<_> = m.outputs().iter().map(|o| o.name.as_str()).collect();
        assert_eq!(outs, ["a", "v", "s"]);
        assert_eq!(parse_model(H1).unwrap(), m);
    }

    #[test]
    fn constant_model() {
        let m = parse_model("hypothesis c { out c = 5; }").unwrap();
        assert!(m.params().is_empty());
        let sigma = m.extract_fds();
        assert_eq!(sigma.normalized(), BTreeSet::from([(set(&["upsilon"]), "c".to_string())]));
    }

    #[test]
    fn rejects_cycles_and_undeclared() {
        let err = parse_model("hypothesis h { out x = y; out y = x; }").unwrap_err();
        assert!(matches!(err, ModelError::CyclicOutputDefinition(ref c) if c.len() == 3));
        let err = parse_model("hypothesis h { param g; out x = g * q; }").unwrap_err();
        assert_eq!(err, ModelError::UndeclaredVariable { output: "x".into(), name: "q".into() });
        assert_eq!(parse_model("hypothesis h { param g; dim g; }").unwrap_err(), ModelError::DuplicateName("g".into()));
        assert_eq!(parse_model("hypothesis h { param phi; }").unwrap_err(), ModelError::ReservedName("phi".into()));
        assert!(matches!(
            parse_model("hypothesis h { param g; dim t; out x = t^g; }"),
            Err(ModelError::NonConstantExponent { line: 1, .. })
        ));
    }

    #[test]
    fn forward_references_evaluate_in_dependency_order() {
        let m = parse_model("hypothesis h { param g; out y = x * 2; out x = g + 1; }").unwrap();
        let t = m.evaluate(&pv(&[("g", 1.0)]), &[BTreeMap::new()]).unwrap();
        assert_eq!(t.outputs, vec!["y", "x"]);
        assert_eq!(t.rows[0].outputs, vec![4.0, 2.0]);
        let sigma = m.extract_fds();
        assert!(sigma.normalized().contains(&(set(&["g", "upsilon"]), "y".to_string())));
    }

    #[test]
    fn extracts_free_fall_fds() {
        let sigma = parse_model(H1).unwrap().extract_fds();
        let expected = BTreeSet::from([
            (set(&["phi"]), "g".to_string()),
            (set(&["phi"]), "v0".to_string()),
            (set(&["phi"]), "s0".to_string()),
            (set(&["g", "upsilon"]), "a".to_string()),
            (set(&["g", "v0", "t", "upsilon"]), "v".to_string()),
            (set(&["g", "v0", "s0", "t", "upsilon"]), "s".to_string()),
        ]);
        assert_eq!(sigma.normalized(), expected);
    }

    #[test]
    fn stokes_and_velocity_squared_share_fds() {
        let s2 = parse_model(H2).unwrap().extract_fds();
        let s3 = parse_model(H3).unwrap().extract_fds();
        assert_eq!(s2.normalized(), s3.normalized());
        assert!(s2.normalized().contains(&(set(&["upsilon"]), "a".to_string())));
        assert!(s2.normalized().contains(&(set(&["D", "g", "upsilon"]), "v".to_string())));
    }

    #[test]
    fn syntactic_dependence_is_kept() {
        let m = parse_model("hypothesis h { param g; out z = g - g; }").unwrap();
        assert!(m.extract_fds().normalized().contains(&(set(&["g", "upsilon"]), "z".to_string())));
    }

    #[test]
    fn evaluates_fall_table() {
        let m = parse_model(H1).unwrap();
        let t = m.evaluate(&pv(&[("g", 32.0), ("v0", 0.0), ("s0", 5000.0)]), &grid(&[0.0, 1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(t.column("v").unwrap(), vec![0.0, -32.0, -64.0, -96.0, -128.0]);
        assert_eq!(t.column("s").unwrap(), vec![5000.0, 4984.0, 4936.0, 4856.0, 4744.0]);
        assert_eq!(t.column("a").unwrap()[0], -32.0);
    }

    #[test]
    fn evaluates_stokes_by_hand_values() {
        let m = parse_model(H2).unwrap();
        let t = m.evaluate(&pv(&[("g", 32.0), ("D", 0.0014375), ("s0", 5000.0)]), &grid(&[3.0])).unwrap();
        assert!((t.column("v").unwrap()[0] + 10.0).abs() < 1e-9);
        assert!((t.column("s").unwrap()[0] - 4970.0).abs() < 1e-9);
    }

    #[test]
    fn evaluation_errors() {
        let m = parse_model(H2).unwrap();
        let err = m.evaluate(&pv(&[("g", -32.0), ("D", 0.001), ("s0", 0.0)]), &grid(&[1.0])).unwrap_err();
        assert!(matches!(err, EvalError::NegativeSqrtArgument { .. }));
        assert_eq!(m.evaluate(&pv(&[("g", 32.0)]), &grid(&[1.0])).unwrap_err(), EvalError::UnboundParameter("D".into()));
        let div = parse_model("hypothesis h { param g; out x = 1 / g; }").unwrap();
        assert_eq!(div.evaluate(&pv(&[("g", 0.0)]), &[BTreeMap::new()]).unwrap_err(), EvalError::DivisionByZero { output: "x".into() });
        assert_eq!(div.evaluate(&pv(&[("g", 1.0)]), &[]).unwrap_err(), EvalError::EmptyGrid);
    }

    #[test]
    fn pretty_print_round_trips() {
        for src in [H1, H2, H3] {
            let m = parse_model(src).unwrap();
            assert_eq!(parse_model(&m.pretty_print()).unwrap(), m);
        }
    }
}
