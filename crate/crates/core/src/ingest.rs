//! Simulation trial loading and uncertainty factor learning.
//!
//! Input files are `tid,phi,<param>...`; output files are
//! `tid,phi,upsilon,<dim>...,<output>...`, one wide file or one file per
//! output attribute.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relation::{Attribute, Tuple, URelation, Value, PHI, UPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{source_name}:{line}: {message}")]
    MalformedRow { source_name: String, line: u64, message: String },
    #[error("{source_name}: missing column `{column}`")]
    MissingColumn { source_name: String, column: String },
    #[error("output row references tid {tid} of phenomenon {phi}, which has no input row")]
    DanglingTid { tid: u64, phi: u64 },
    #[error("tid {tid} appears twice for phenomenon {phi}")]
    DuplicateTid { tid: u64, phi: u64 },
    #[error("output `{attr}` given twice for tid {tid}, phenomenon {phi}, hypothesis {upsilon}")]
    DuplicateOutput { attr: String, tid: u64, phi: u64, upsilon: u64 },
    #[error("no trial input rows")]
    EmptyInput,
    #[error("tolerance {0} outside [0, 0.5)")]
    InvalidTolerance(f64),
    #[error("`{0}` is not an input parameter")]
    UnknownParameter(String),
    #[error("{count} uncertain parameters exceed the exhaustive search limit of {max}")]
    TooManyUncertainParams { count: usize, max: usize },
    #[error("no trial matches {params:?} = {values:?}")]
    NoMatchingTrial { params: Vec<String>, values: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Upper bound on uncertain parameters for the exhaustive partition search
/// (Bell(10) = 115975 candidate partitions).
pub const MAX_UNCERTAIN_PARAMS: usize = 10;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInput {
    pub tid: u64,
    pub phi: u64,
    /// Parameter values in the column order of [`TrialInputs::params`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialInputs {
    pub params: Vec<String>,
    pub rows: Vec<TrialInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub tid: u64,
    pub phi: u64,
    pub upsilon: u64,
    pub dims: Vec<f64>,
    pub value: f64,
}

/// Every observed value of one output attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSeries {
    pub attr: String,
    pub dims: Vec<String>,
    pub rows: Vec<OutputRow>,
}

fn malformed(source_name: &str, line: u64, message: impl Into<String>) -> IngestError {
    IngestError::MalformedRow { source_name: source_name.to_string(), line, message: message.into() }
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(rdr)
}

fn csv_error(source_name: &str, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    malformed(source_name, line, e.to_string())
}

fn column(headers: &[String], name: &str, source_name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn { source_name: source_name.to_string(), column: name.to_string() })
}

fn parse_id(field: &str, name: &str, source_name: &str, line: u64) -> Result<u64> {
    match field.parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(malformed(source_name, line, format!("`{name}` must be a positive integer, got `{field}`"))),
    }
}

fn parse_num(field: &str, name: &str, source_name: &str, line: u64) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(malformed(source_name, line, format!("`{name}` must be a finite number, got `{field}`"))),
    }
}

fn read_headers<R: Read>(rdr: &mut csv::Reader<R>, source_name: &str) -> Result<Vec<String>> {
    Ok(rdr.headers().map_err(|e| csv_error(source_name, e))?.iter().map(str::to_string).collect())
}

pub fn read_inputs<R: Read>(rdr: R, source_name: &str) -> Result<TrialInputs> {
    let mut rdr = csv_reader(rdr);
    let headers = read_headers(&mut rdr, source_name)?;
    let tid_col = column(&headers, "tid", source_name)?;
    let phi_col = column(&headers, PHI, source_name)?;
    let param_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != tid_col && i != phi_col).collect();
    let params: Vec<String> = param_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source_name, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let tid = parse_id(&rec[tid_col], "tid", source_name, line)?;
        let phi = parse_id(&rec[phi_col], PHI, source_name, line)?;
        if !seen.insert((phi, tid)) {
            return Err(IngestError::DuplicateTid { tid, phi });
        }
        let values = param_cols.iter().zip(&params).map(|(&i, name)| parse_num(&rec[i], name, source_name, line)).collect::<Result<_>>()?;
        rows.push(TrialInput { tid, phi, values });
    }
    Ok(TrialInputs { params, rows })
}

/// Columns named in `dims` are dimensions; every other non-key column is an
/// output attribute.
pub fn read_outputs<R: Read>(rdr: R, source_name: &str, dims: &[String]) -> Result<Vec<OutputSeries>> {
    let mut rdr = csv_reader(rdr);
    let headers = read_headers(&mut rdr, source_name)?;
    if headers.iter().all(|h| h.is_empty()) {
        return Ok(Vec::new());
    }
    let tid_col = column(&headers, "tid", source_name)?;
    let phi_col = column(&headers, PHI, source_name)?;
    let ups_col = column(&headers, UPSILON, source_name)?;
    let keys = [tid_col, phi_col, ups_col];
    let dim_cols: Vec<usize> = (0..headers.len()).filter(|i| !keys.contains(i) && dims.contains(&headers[*i])).collect();
    let out_cols: Vec<usize> = (0..headers.len()).filter(|i| !keys.contains(i) && !dim_cols.contains(i)).collect();
    let dim_names: Vec<String> = dim_cols.iter().map(|&i| headers[i].clone()).collect();
    let mut series: Vec<OutputSeries> =
        out_cols.iter().map(|&i| OutputSeries { attr: headers[i].clone(), dims: dim_names.clone(), rows: Vec::new() }).collect();

    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source_name, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let tid = parse_id(&rec[tid_col], "tid", source_name, line)?;
        let phi = parse_id(&rec[phi_col], PHI, source_name, line)?;
        let upsilon = parse_id(&rec[ups_col], UPSILON, source_name, line)?;
        let dim_values: Vec<f64> = dim_cols.iter().map(|&i| parse_num(&rec[i], &headers[i], source_name, line)).collect::<Result<_>>()?;
        for (s, &i) in series.iter_mut().zip(&out_cols) {
            if rec[i].is_empty() {
                continue;
            }
            let value = parse_num(&rec[i], &headers[i], source_name, line)?;
            s.rows.push(OutputRow { tid, phi, upsilon, dims: dim_values.clone(), value });
        }
    }
    Ok(series)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Loads one input file and any number of output files, merging series of
/// the same attribute and checking every output tid against the inputs.
pub fn load_trials(input: &Path, outputs: &[&Path], dims: &[String]) -> Result<(TrialInputs, Vec<OutputSeries>)> {
    let inputs = read_inputs(open(input)?, &input.display().to_string())?;
    let mut series = Vec::new();
    for path in outputs {
        series.extend(read_outputs(open(path)?, &path.display().to_string(), dims)?);
    }
    let series = merge_series(series)?;
    check_references(&inputs, &series)?;
    Ok((inputs, series))
}

/// Merges series of equal attribute name, rejecting duplicate keys.
pub fn merge_series(all: Vec<OutputSeries>) -> Result<Vec<OutputSeries>> {
    let mut merged: Vec<OutputSeries> = Vec::new();
    for s in all {
        match merged.iter_mut().find(|m| m.attr == s.attr) {
            Some(m) if m.dims == s.dims => m.rows.extend(s.rows),
            Some(m) => {
                let r = s.rows.first().or(m.rows.first());
                return Err(IngestError::DuplicateOutput {
                    attr: s.attr,
                    tid: r.map_or(0, |r| r.tid),
                    phi: r.map_or(0, |r| r.phi),
                    upsilon: r.map_or(0, |r| r.upsilon),
                });
            }
            None => merged.push(s),
        }
    }
    for s in &merged {
        let mut keys = BTreeSet::new();
        for r in &s.rows {
            let dims: Vec<Value> = r.dims.iter().map(|&d| Value::num(d)).collect();
            if !keys.insert((r.tid, r.phi, r.upsilon, dims)) {
                return Err(IngestError::DuplicateOutput { attr: s.attr.clone(), tid: r.tid, phi: r.phi, upsilon: r.upsilon });
            }
        }
    }
    Ok(merged)
}

pub fn check_references(inputs: &TrialInputs, series: &[OutputSeries]) -> Result<()> {
    let tids: BTreeSet<(u64, u64)> = inputs.rows.iter().map(|r| (r.phi, r.tid)).collect();
    for s in series {
        if let Some(r) = s.rows.iter().find(|r| !tids.contains(&(r.phi, r.tid))) {
            return Err(IngestError::DanglingTid { tid: r.tid, phi: r.phi });
        }
    }
    Ok(())
}

impl TrialInputs {
    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.params.iter().position(|p| p == name).ok_or_else(|| IngestError::UnknownParameter(name.to_string()))
    }

    pub fn for_phenomenon(&self, phi: u64) -> TrialInputs {
        TrialInputs { params: self.params.clone(), rows: self.rows.iter().filter(|r| r.phi == phi).cloned().collect() }
    }

    pub fn phenomena(&self) -> BTreeSet<u64> {
        self.rows.iter().map(|r| r.phi).collect()
    }

    /// Certain relation `(tid, phi, params...)`.
    pub fn to_relation(&self, name: &str) -> URelation {
        let mut schema = vec![Attribute::id("tid"), Attribute::id(PHI)];
        schema.extend(self.params.iter().map(Attribute::numeric));
        let mut r = URelation::new(name, schema);
        for row in &self.rows {
            let mut values = vec![Value::Id(row.tid), Value::Id(row.phi)];
            values.extend(row.values.iter().map(|&v| Value::num(v)));
            r.push(Tuple::certain(values));
        }
        r
    }
}

impl OutputSeries {
    /// Certain relation `(tid, phi, upsilon, dims..., attr)`.
    pub fn to_relation(&self, name: &str) -> URelation {
        let mut schema = vec![Attribute::id("tid"), Attribute::id(PHI), Attribute::id(UPSILON)];
        schema.extend(self.dims.iter().map(Attribute::numeric));
        schema.push(Attribute::numeric(&self.attr));
        let mut r = URelation::new(name, schema);
        for row in &self.rows {
            let mut values = vec![Value::Id(row.tid), Value::Id(row.phi), Value::Id(row.upsilon)];
            values.extend(row.dims.iter().map(|&d| Value::num(d)));
            values.push(Value::num(row.value));
            r.push(Tuple::certain(values));
        }
        r
    }
}

/// An independent group of parameters with its observed joint values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyFactor {
    pub params: Vec<String>,
    /// Distinct joint values, ascending.
    pub support: Vec<Vec<f64>>,
    /// Trial counts aligned with `support`.
    pub frequencies: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedFactors {
    /// Parameters observed with a single value, in declaration order.
    pub certain: Vec<(String, f64)>,
    /// Ordered by their first parameter's declaration position.
    pub factors: Vec<UncertaintyFactor>,
}

impl LearnedFactors {
    pub fn factor_of(&self, param: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.params.iter().any(|p| p == param))
    }

    pub fn is_certain(&self, param: &str) -> bool {
        self.certain.iter().any(|(p, _)| p == param)
    }
}

type Joint = Vec<Value>;

/// All set partitions of `0..n` as restricted growth strings, blocks listed
/// by smallest member.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, rgs: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let blocks = rgs.iter().max().map_or(0, |m| m + 1);
            let mut p = vec![Vec::new(); blocks];
            for (elem, &b) in rgs.iter().enumerate() {
                p[b].push(elem);
            }
            out.push(p);
            return;
        }
        for b in 0..=max.min(i) {
            rgs.push(b);
            let next = if b == max { max + 1 } else { max };
            rec(i + 1, n, rgs, next, out);
            rgs.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        rec(0, n, &mut Vec::new(), 0, &mut out);
    }
    out
}

fn project_joint(joint: &Joint, block: &[usize]) -> Joint {
    block.iter().map(|&i| joint[i].clone()).collect()
}

/// Whether the joint relative frequencies equal the product of the block
/// marginals within `tol`, including every combination never observed.
fn factorizes(joints: &BTreeMap<Joint, u64>, n: f64, width: usize, blocks: &[Vec<usize>], tol: f64) -> bool {
    let marginals: Vec<BTreeMap<Joint, f64>> = blocks
        .iter()
        .map(|b| {
            let mut m: BTreeMap<Joint, f64> = BTreeMap::new();
            for (j, &c) in joints {
                *m.entry(project_joint(j, b)).or_default() += c as f64 / n;
            }
            m
        })
        .collect();
    let product = |j: &Joint| -> f64 { blocks.iter().zip(&marginals).map(|(b, m)| m[&project_joint(j, b)]).product() };
    let mut observed_mass = 0.0;
    for (j, &c) in joints {
        let p = product(j);
        observed_mass += p;
        if (c as f64 / n - p).abs() > tol {
            return false;
        }
    }
    // Unobserved combinations each have frequency 0; their products sum to
    // the remaining mass, so a small remainder settles them all at once.
    if 1.0 - observed_mass <= tol {
        return true;
    }
    let supports: Vec<Vec<(&Joint, f64)>> = marginals.iter().map(|m| m.iter().map(|(k, &v)| (k, v)).collect()).collect();
    let mut idx = vec![0usize; blocks.len()];
    loop {
        let mut joint = vec![Value::Id(0); width];
        let mut p = 1.0;
        for (bi, b) in blocks.iter().enumerate() {
            let (vals, m) = supports[bi][idx[bi]];
            p *= m;
            for (k, &pos) in b.iter().enumerate() {
                joint[pos] = vals[k].clone();
            }
        }
        if !joints.contains_key(&joint) && p > tol {
            return false;
        }
        let mut k = blocks.len();
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < supports[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Splits `params` into certain parameters and the finest partition of the
/// uncertain ones whose block marginals reproduce the observed joint
/// frequencies. Ties among equally fine partitions go to the
/// lexicographically smallest block list.
pub fn learn_factors(inputs: &TrialInputs, params: &[&str], tol: f64) -> Result<LearnedFactors> {
    if inputs.rows.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    if !(0.0..0.5).contains(&tol) {
        return Err(IngestError::InvalidTolerance(tol));
    }
    let cols = params.iter().map(|p| inputs.param_index(p)).collect::<Result<Vec<_>>>()?;

    let mut certain = Vec::new();
    let mut uncertain: Vec<usize> = Vec::new();
    for (k, &c) in cols.iter().enumerate() {
        let distinct: BTreeSet<Value> = inputs.rows.iter().map(|r| Value::num(r.values[c])).collect();
        if distinct.len() == 1 {
            certain.push((params[k].to_string(), inputs.rows[0].values[c]));
        } else {
            uncertain.push(k);
        }
    }
    if uncertain.len() > MAX_UNCERTAIN_PARAMS {
        return Err(IngestError::TooManyUncertainParams { count: uncertain.len(), max: MAX_UNCERTAIN_PARAMS });
    }

    let mut joints: BTreeMap<Joint, u64> = BTreeMap::new();
    for r in &inputs.rows {
        let j = uncertain.iter().map(|&k| Value::num(r.values[cols[k]])).collect();
        *joints.entry(j).or_default() += 1;
    }
    let n = inputs.rows.len() as f64;

    let mut candidates = set_partitions(uncertain.len());
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let chosen = candidates
        .into_iter()
        .find(|p| factorizes(&joints, n, uncertain.len(), p, tol))
        .expect("the single-block partition always factorizes");

    let factors = chosen
        .iter()
        .map(|block| {
            let mut counts: BTreeMap<Joint, u64> = BTreeMap::new();
            for (j, &c) in &joints {
                *counts.entry(project_joint(j, block)).or_default() += c;
            }
            UncertaintyFactor {
                params: block.iter().map(|&i| params[uncertain[i]].to_string()).collect(),
                support: counts.keys().map(|j| j.iter().map(|v| v.as_f64().unwrap()).collect()).collect(),
                frequencies: counts.values().copied().collect(),
            }
        })
        .collect();
    Ok(LearnedFactors { certain, factors })
}

/// Smallest tid whose parameters equal `values` on `params`.
pub fn representative_tid(inputs: &TrialInputs, params: &[&str], values: &[f64]) -> Result<u64> {
    let cols = params.iter().map(|p| inputs.param_index(p)).collect::<Result<Vec<_>>>()?;
    inputs
        .rows
        .iter()
        .filter(|r| cols.iter().zip(values).all(|(&c, &v)| Value::num(r.values[c]) == Value::num(v)))
        .map(|r| r.tid)
        .min()
        .ok_or_else(|| IngestError::NoMatchingTrial { params: params.iter().map(|p| p.to_string()).collect(), values: values.to_vec() })
}
