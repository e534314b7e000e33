//! Evaluation of a model over a parameter valuation and a grid of dimension
//! valuations. Output expressions are compiled once to a flat stack program.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{BinOp, Expr};
use super::HypothesisModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero while evaluating `{output}`")]
    DivisionByZero { output: String },
    #[error("square root of negative value {value} while evaluating `{output}`")]
    NegativeSqrtArgument { output: String, value: f64 },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("dimension `{0}` is not bound at grid point {1}")]
    UnboundDimension(String, usize),
    #[error("evaluation grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(f64),
    Load(usize),
    Neg,
    Sqrt,
    Bin(BinOp),
}

#[derive(Debug, Clone)]
struct Program {
    output: String,
    slot: usize,
    code: Vec<Instr>,
}

/// A model lowered to stack programs over a slot vector laid out as
/// params, then dims, then outputs (declaration order).
#[derive(Debug, Clone)]
pub struct CompiledModel {
    params: Vec<String>,
    dims: Vec<String>,
    outputs: Vec<String>,
    /// Programs in dependency order.
    programs: Vec<Program>,
}

fn lower(e: &Expr, slots: &BTreeMap<&str, usize>, code: &mut Vec<Instr>) {
    match e {
        Expr::Const(c) => code.push(Instr::Const(*c)),
        Expr::Var(v) => code.push(Instr::Load(slots[v.as_str()])),
        Expr::Neg(x) => {
            lower(x, slots, code);
            code.push(Instr::Neg);
        }
        Expr::Sqrt(x) => {
            lower(x, slots, code);
            code.push(Instr::Sqrt);
        }
        Expr::Binary(op, l, r) => {
            lower(l, slots, code);
            lower(r, slots, code);
            code.push(Instr::Bin(*op));
        }
    }
}

impl CompiledModel {
    pub fn new(m: &HypothesisModel) -> Self {
        let mut slots: BTreeMap<&str, usize> = BTreeMap::new();
        for name in m.params().iter().chain(m.dims()).chain(m.outputs().iter().map(|o| &o.name)) {
            let next = slots.len();
            slots.insert(name.as_str(), next);
        }
        let programs = m
            .evaluation_order()
            .iter()
            .map(|&i| {
                let out = &m.outputs()[i];
                let mut code = Vec::new();
                lower(&out.expr, &slots, &mut code);
                Program { output: out.name.clone(), slot: slots[out.name.as_str()], code }
            })
            .collect();
        Self {
            params: m.params().to_vec(),
            dims: m.dims().to_vec(),
            outputs: m.outputs().iter().map(|o| o.name.clone()).collect(),
            programs,
        }
    }

    fn run(&self, slots: &mut [f64], stack: &mut Vec<f64>) -> Result<(), EvalError> {
        for p in &self.programs {
            stack.clear();
            for ins in &p.code {
                match *ins {
                    Instr::Const(c) => stack.push(c),
                    Instr::Load(s) => stack.push(slots[s]),
                    Instr::Neg => {
                        let x = stack.pop().unwrap();
                        stack.push(-x);
                    }
                    Instr::Sqrt => {
                        let x = stack.pop().unwrap();
                        if x < 0.0 {
                            return Err(EvalError::NegativeSqrtArgument { output: p.output.clone(), value: x });
                        }
                        stack.push(x.sqrt());
                    }
                    Instr::Bin(op) => {
                        let r = stack.pop().unwrap();
                        let l = stack.pop().unwrap();
                        stack.push(match op {
                            BinOp::Add => l + r,
                            BinOp::Sub => l - r,
                            BinOp::Mul => l * r,
                            BinOp::Div => {
                                if r == 0.0 {
                                    return Err(EvalError::DivisionByZero { output: p.output.clone() });
                                }
                                l / r
                            }
                            BinOp::Pow => l.powf(r),
                        });
                    }
                }
            }
            slots[p.slot] = stack.pop().unwrap();
        }
        Ok(())
    }

    pub fn evaluate(&self, params: &BTreeMap<String, f64>, grid: &[BTreeMap<String, f64>]) -> Result<EvalTable, EvalError> {
        if grid.is_empty() {
            return Err(EvalError::EmptyGrid);
        }
        let p = self.params.len();
        let d = self.dims.len();
        let mut slots = vec![0.0; p + d + self.outputs.len()];
        for (i, name) in self.params.iter().enumerate() {
            slots[i] = *params.get(name).ok_or_else(|| EvalError::UnboundParameter(name.clone()))?;
        }
        let mut stack = Vec::with_capacity(16);
        let mut rows = Vec::with_capacity(grid.len());
        for (k, point) in grid.iter().enumerate() {
            for (i, name) in self.dims.iter().enumerate() {
                slots[p + i] = *point.get(name).ok_or_else(|| EvalError::UnboundDimension(name.clone(), k))?;
            }
            self.run(&mut slots, &mut stack)?;
            rows.push(EvalRow { dims: slots[p..p + d].to_vec(), outputs: slots[p + d..].to_vec() });
        }
        Ok(EvalTable { dims: self.dims.clone(), outputs: self.outputs.clone(), rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub dims: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// One row per grid point: the dimension values, then every output in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub dims: Vec<String>,
    pub outputs: Vec<String>,
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(i) = self.dims.iter().position(|d| d == name) {
            return Some(self.rows.iter().map(|r| r.dims[i]).collect());
        }
        let i = self.outputs.iter().position(|o| o == name)?;
        Some(self.rows.iter().map(|r| r.outputs[i]).collect())
    }
}
