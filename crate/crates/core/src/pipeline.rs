//! Synthesis of the probabilistic hypothesis database from a project:
//! descriptive relations, the hypothesis-choice relation `Y[Exp]`, one
//! factor relation per learned uncertainty factor, one prediction relation
//! per hypothesis and output, and their unions `Y[o]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{self, group_count, join, project, repair_key, union_all, AlgebraError, ZeroWeight};
use crate::analytics::ConditioningStep;
use crate::fd::{AttrSet, FdError, FdSet, RelationScheme, SchemeKind};
use crate::ingest::{self, IngestError, LearnedFactors, OutputSeries, TrialInputs};
use crate::model::HypothesisModel;
use crate::relation::{Attribute, Tuple, URelation, Value, PHI, UPSILON};
use crate::worldset::{Descriptor, VarId, WorldError, WorldTable};

pub const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("phenomenon {0} declared twice")]
    DuplicatePhenomenon(u64),
    #[error("hypothesis {0} declared twice")]
    DuplicateHypothesis(u64),
    #[error("hypothesis {upsilon} declares id {declared} in its model")]
    HypothesisIdMismatch { upsilon: u64, declared: u32 },
    #[error("unknown phenomenon {0}")]
    UnknownPhenomenon(u64),
    #[error("unknown hypothesis {0}")]
    UnknownHypothesis(u64),
    #[error("explanation ({phi}, {upsilon}) given twice")]
    DuplicateExplanation { phi: u64, upsilon: u64 },
    #[error("prior of ({phi}, {upsilon}) must be a finite non-negative number, got {conf}")]
    InvalidPrior { phi: u64, upsilon: u64, conf: f64 },
    #[error("priors of phenomenon {phi} sum to {}, expected 1", (sum * 1e9).round() / 1e9)]
    PriorsNotNormalized { phi: u64, sum: f64 },
    #[error("trials for hypothesis {0} given twice")]
    DuplicateTrials(u64),
    #[error("no trials for phenomenon {phi} under hypothesis {upsilon}")]
    MissingTrials { phi: u64, upsilon: u64 },
    #[error("trial inputs of hypothesis {upsilon} lack parameter `{param}`")]
    MissingParameter { upsilon: u64, param: String },
    #[error("trial outputs of hypothesis {upsilon} lack `{attr}`")]
    MissingOutput { upsilon: u64, attr: String },
    #[error("trial outputs of `{attr}` under hypothesis {upsilon} lack dimension `{dim}`")]
    MissingDimension { upsilon: u64, attr: String, dim: String },
    #[error("`{attr}` of tid {tid} takes different values for the same dimensions")]
    InconsistentOutput { attr: String, tid: u64 },
    #[error("no trial of hypothesis {upsilon} for phenomenon {phi} has {params:?} = {values:?}")]
    MissingTrialForFactorValue { phi: u64, upsilon: u64, params: Vec<String>, values: Vec<f64> },
    #[error("trial {tid} of hypothesis {upsilon} has no `{attr}` output")]
    MissingOutputForTrial { upsilon: u64, tid: u64, attr: String },
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    World(#[from] WorldError),
}

impl PipelineError {
    /// Errors caused by an inconsistent project description rather than by
    /// the data or the engine.
    pub fn is_validation(&self) -> bool {
        use PipelineError::*;
        matches!(
            self,
            DuplicatePhenomenon(_)
                | DuplicateHypothesis(_)
                | HypothesisIdMismatch { .. }
                | UnknownPhenomenon(_)
                | UnknownHypothesis(_)
                | DuplicateExplanation { .. }
                | InvalidPrior { .. }
                | PriorsNotNormalized { .. }
                | DuplicateTrials(_)
                | MissingTrials { .. }
                | MissingParameter { .. }
                | MissingOutput { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenomenon {
    pub phi: u64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub upsilon: u64,
    pub model: HypothesisModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub phi: u64,
    pub upsilon: u64,
    pub conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trials {
    pub upsilon: u64,
    pub inputs: TrialInputs,
    pub outputs: Vec<OutputSeries>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Absolute tolerance of the factorization test in factor learning.
    pub tolerance: f64,
    pub zero_weight: ZeroWeight,
}

impl Default for Settings {
    fn default() -> Self {
        Self { tolerance: ingest::DEFAULT_TOLERANCE, zero_weight: ZeroWeight::Keep }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub phenomena: Vec<Phenomenon>,
    pub hypotheses: Vec<Hypothesis>,
    pub explanation: Vec<Explanation>,
    pub trials: Vec<Trials>,
    #[serde(default)]
    pub settings: Settings,
}

impl Project {
    pub fn validate(&self) -> Result<()> {
        let mut phis = BTreeSet::new();
        for p in &self.phenomena {
            if !phis.insert(p.phi) {
                return Err(PipelineError::DuplicatePhenomenon(p.phi));
            }
        }
        let mut hyps = BTreeMap::new();
        for h in &self.hypotheses {
            if hyps.insert(h.upsilon, h).is_some() {
                return Err(PipelineError::DuplicateHypothesis(h.upsilon));
            }
            if let Some(id) = h.model.id() {
                if u64::from(id) != h.upsilon {
                    return Err(PipelineError::HypothesisIdMismatch { upsilon: h.upsilon, declared: id });
                }
            }
        }
        let mut pairs = BTreeSet::new();
        let mut sums: BTreeMap<u64, f64> = phis.iter().map(|&p| (p, 0.0)).collect();
        for e in &self.explanation {
            if !phis.contains(&e.phi) {
                return Err(PipelineError::UnknownPhenomenon(e.phi));
            }
            if !hyps.contains_key(&e.upsilon) {
                return Err(PipelineError::UnknownHypothesis(e.upsilon));
            }
            if !pairs.insert((e.phi, e.upsilon)) {
                return Err(PipelineError::DuplicateExplanation { phi: e.phi, upsilon: e.upsilon });
            }
            if !e.conf.is_finite() || e.conf < 0.0 {
                return Err(PipelineError::InvalidPrior { phi: e.phi, upsilon: e.upsilon, conf: e.conf });
            }
            *sums.get_mut(&e.phi).unwrap() += e.conf;
        }
        for (&phi, &sum) in &sums {
            if (sum - 1.0).abs() > PRIOR_TOLERANCE {
                return Err(PipelineError::PriorsNotNormalized { phi, sum });
            }
        }

        let mut trials = BTreeMap::new();
        for t in &self.trials {
            if !hyps.contains_key(&t.upsilon) {
                return Err(PipelineError::UnknownHypothesis(t.upsilon));
            }
            if trials.insert(t.upsilon, t).is_some() {
                return Err(PipelineError::DuplicateTrials(t.upsilon));
            }
        }
        for &(phi, upsilon) in &pairs {
            let missing = PipelineError::MissingTrials { phi, upsilon };
            let t = trials.get(&upsilon).ok_or(missing.clone())?;
            if !t.inputs.rows.iter().any(|r| r.phi == phi) {
                return Err(missing);
            }
            let model = &hyps[&upsilon].model;
            if let Some(p) = model.params().iter().find(|p| !t.inputs.params.contains(p)) {
                return Err(PipelineError::MissingParameter { upsilon, param: p.clone() });
            }
            if let Some(o) = model.outputs().iter().find(|o| !t.outputs.iter().any(|s| s.attr == o.name)) {
                return Err(PipelineError::MissingOutput { upsilon, attr: o.name.clone() });
            }
        }
        Ok(())
    }

    fn trials_of(&self, upsilon: u64) -> &Trials {
        self.trials.iter().find(|t| t.upsilon == upsilon).expect("validated")
    }
}

/// Why a variable exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableOrigin {
    /// Choice among the hypotheses of a phenomenon; value `i` is the i-th
    /// hypothesis in ascending order.
    Explanation { phi: u64, hypotheses: Vec<u64> },
    /// An uncertainty factor; value `i` is `support[i - 1]`.
    Factor { phi: u64, upsilon: u64, params: Vec<String>, support: Vec<Vec<f64>> },
    /// Joint of the variables a conditioning step correlated; value `i`
    /// stands for `blocks[i - 1]`, a descriptor over `replaced`.
    Compound { step: usize, replaced: Vec<VarId>, blocks: Vec<Descriptor> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub var: VarId,
    pub origin: VariableOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonSynthesis {
    pub phi: u64,
    pub factors: LearnedFactors,
    /// Fold/unfold schemes given this phenomenon's certain parameters.
    pub schemes: Vec<RelationScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSynthesis {
    pub upsilon: u64,
    pub model: HypothesisModel,
    pub fds: FdSet,
    pub normalized: Vec<RelationScheme>,
    pub phenomena: Vec<PhenomenonSynthesis>,
}

impl HypothesisSynthesis {
    pub fn name(&self) -> &str {
        self.model.name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInfo {
    pub attr: String,
    pub dims: Vec<String>,
}

/// The built database: world table, named U-relations and the synthesis
/// metadata needed to explain them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    pub world: WorldTable,
    relations: BTreeMap<String, URelation>,
    variables: Vec<VariableRecord>,
    phenomena: Vec<Phenomenon>,
    explanation: Vec<Explanation>,
    hypotheses: Vec<HypothesisSynthesis>,
    predictions: Vec<PredictionInfo>,
    pub history: Vec<ConditioningStep>,
}

pub fn prediction_name(attr: &str) -> String {
    format!("Y[{attr}]")
}

fn hypothesis_relation(upsilon: u64, attr: &str) -> String {
    format!("Y{upsilon}[{attr}]")
}

fn append(relations: &mut BTreeMap<String, URelation>, name: &str, r: URelation) {
    match relations.get_mut(name) {
        Some(existing) => {
            for t in r.tuples() {
                existing.push(t.clone());
            }
        }
        None => {
            relations.insert(name.to_string(), r.with_name(name));
        }
    }
}

fn descriptive_relations(p: &Project) -> [URelation; 3] {
    let mut phen = URelation::new("PHENOMENON", vec![Attribute::id(PHI), Attribute::text("description")]);
    for ph in &p.phenomena {
        phen.push(Tuple::certain(vec![Value::Id(ph.phi), Value::text(ph.description.clone())]));
    }
    let mut hyp = URelation::new("HYPOTHESIS", vec![Attribute::id(UPSILON), Attribute::text("name")]);
    for h in &p.hypotheses {
        hyp.push(Tuple::certain(vec![Value::Id(h.upsilon), Value::text(h.model.name())]));
    }
    let mut exp = URelation::new("EXPLANATION", vec![Attribute::id(PHI), Attribute::id(UPSILON), Attribute::numeric("conf")]);
    let mut rows: Vec<&Explanation> = p.explanation.iter().collect();
    rows.sort_by_key(|e| (e.phi, e.upsilon));
    for e in rows {
        exp.push(Tuple::certain(vec![Value::Id(e.phi), Value::Id(e.upsilon), Value::num(e.conf)]));
    }
    [phen, hyp, exp]
}

/// Output relation `(tid, phi, upsilon, dims..., attr)` of one phenomenon and
/// hypothesis, restricted to `dims`. Extra dimension columns in the trial
/// data are dropped provided the value does not vary along them.
fn output_relation(series: &OutputSeries, phi: u64, upsilon: u64, dims: &[String]) -> Result<URelation> {
    let cols = dims
        .iter()
        .map(|d| {
            series.dims.iter().position(|s| s == d).ok_or_else(|| PipelineError::MissingDimension {
                upsilon,
                attr: series.attr.clone(),
                dim: d.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut schema = vec![Attribute::id("tid"), Attribute::id(PHI), Attribute::id(UPSILON)];
    schema.extend(dims.iter().map(Attribute::numeric));
    schema.push(Attribute::numeric(&series.attr));
    let mut r = URelation::new(format!("H{upsilon}_OUTPUT[{}]", series.attr), schema);
    let mut seen: BTreeMap<(u64, Vec<Value>), Value> = BTreeMap::new();
    for row in series.rows.iter().filter(|r| r.phi == phi && r.upsilon == upsilon) {
        let dim_values: Vec<Value> = cols.iter().map(|&c| Value::num(row.dims[c])).collect();
        let value = Value::num(row.value);
        match seen.get(&(row.tid, dim_values.clone())) {
            Some(v) if *v == value => continue,
            Some(_) => return Err(PipelineError::InconsistentOutput { attr: series.attr.clone(), tid: row.tid }),
            None => {
                seen.insert((row.tid, dim_values.clone()), value.clone());
            }
        }
        let mut values = vec![Value::Id(row.tid), Value::Id(phi), Value::Id(upsilon)];
        values.extend(dim_values);
        values.push(value);
        r.push(Tuple::certain(values));
    }
    Ok(r)
}

struct FactorVar {
    params: Vec<String>,
    relation: URelation,
    support: Vec<Vec<f64>>,
}

/// Runs the whole synthesis. Variables are registered in a fixed order:
/// hypothesis choices first (ascending phenomenon), then the factors of
/// each hypothesis in declaration order.
pub fn build(p: &Project) -> Result<Engine> {
    p.validate()?;
    let mut world = WorldTable::new();
    let mut relations = BTreeMap::new();
    let mut variables = Vec::new();

    let [phen, hyp, exp] = descriptive_relations(p);
    let repaired = repair_key(&exp, &[PHI], "conf", &mut world, p.settings.zero_weight)?;
    for v in &repaired.variables {
        variables.push(VariableRecord {
            var: v.var,
            origin: VariableOrigin::Explanation {
                phi: v.key[0].as_id().unwrap(),
                hypotheses: v.alternatives.iter().map(|a| a[1].as_id().unwrap()).collect(),
            },
        });
    }
    let y_exp = project(&repaired.relation, &[PHI, UPSILON], false)?.with_name("Y[Exp]");
    for r in [phen, hyp, exp] {
        relations.insert(r.name.clone(), r);
    }

    // An output that is constant along a dimension in one hypothesis still
    // carries that dimension when another hypothesis varies along it.
    let mut prediction_dims: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for h in &p.hypotheses {
        for o in h.model.outputs() {
            let (_, reached) = h.model.reachable_inputs(&o.name);
            let dims = prediction_dims.entry(o.name.clone()).or_default();
            for d in h.model.dims().iter().filter(|d| reached.contains(*d)) {
                if !dims.contains(d) {
                    dims.push(d.clone());
                }
            }
        }
    }

    let mut hypotheses = Vec::new();
    let mut predictions: Vec<PredictionInfo> = Vec::new();
    for h in &p.hypotheses {
        let upsilon = h.upsilon;
        let model = &h.model;
        let trials = p.trials_of(upsilon);
        let mut fds = model.extract_fds();
        fds.set_hypothesis(Some(upsilon as u32));
        let normalized = fds.synthesize_3nf();
        let param_names: Vec<&str> = model.params().iter().map(String::as_str).collect();

        relations.insert(format!("H{upsilon}_INPUT"), trials.inputs.to_relation(&format!("H{upsilon}_INPUT")));
        for s in &trials.outputs {
            let name = format!("H{upsilon}_OUTPUT[{}]", s.attr);
            relations.insert(name.clone(), s.to_relation(&name));
        }

        let mut phis: Vec<u64> = p.explanation.iter().filter(|e| e.upsilon == upsilon).map(|e| e.phi).collect();
        phis.sort_unstable();
        let mut per_phi = Vec::new();
        for phi in phis {
            let inputs = trials.inputs.for_phenomenon(phi);
            let learned = ingest::learn_factors(&inputs, &param_names, p.settings.tolerance)?;
            let certain: AttrSet = learned.certain.iter().map(|(n, _)| n.clone()).collect();
            let schemes = fds.u_ptc(&certain)?;
            let input_rel = inputs.to_relation(&format!("H{upsilon}_INPUT"));

            let mut factor_vars = Vec::new();
            for f in &learned.factors {
                let mut attrs = vec![PHI];
                attrs.extend(f.params.iter().map(String::as_str));
                let counts = group_count(&input_rel, &attrs, "Fr")?;
                let rep = repair_key(&counts, &[PHI], "Fr", &mut world, ZeroWeight::Keep)?;
                let var = rep.variables.first().expect("uncertain factor has several values").var;
                variables.push(VariableRecord {
                    var,
                    origin: VariableOrigin::Factor { phi, upsilon, params: f.params.clone(), support: f.support.clone() },
                });
                append(&mut relations, &hypothesis_relation(upsilon, &f.params.join(",")), rep.relation.clone());
                factor_vars.push(FactorVar { params: f.params.clone(), relation: rep.relation, support: f.support.clone() });
            }
            for (param, value) in &learned.certain {
                let mut r = URelation::new("", vec![Attribute::id(PHI), Attribute::numeric(param)]);
                r.push(Tuple::certain(vec![Value::Id(phi), Value::num(*value)]));
                append(&mut relations, &hypothesis_relation(upsilon, param), r);
            }

            for o in model.outputs() {
                let name = hypothesis_relation(upsilon, &o.name);
                let scheme =
                    schemes.iter().find(|s| s.kind == SchemeKind::Prediction && s.name == name).expect("one prediction scheme per output");
                let dims = prediction_dims[&o.name].clone();
                if !predictions.iter().any(|pi| pi.attr == o.name) {
                    predictions.push(PredictionInfo { attr: o.name.clone(), dims: dims.clone() });
                }
                let relevant: Vec<&FactorVar> =
                    factor_vars.iter().filter(|f| f.params.iter().any(|q| scheme.uncertainty_deps.contains(q))).collect();
                let series = trials.outputs.iter().find(|s| s.attr == o.name).expect("validated");
                let outputs = output_relation(series, phi, upsilon, &dims)?;
                let rel = prediction_relation(&inputs, &outputs, &relevant, &y_exp, phi, upsilon, &o.name, &dims)?;
                append(&mut relations, &name, rel);
            }
            per_phi.push(PhenomenonSynthesis { phi, factors: learned, schemes });
        }
        hypotheses.push(HypothesisSynthesis { upsilon, model: model.clone(), fds, normalized, phenomena: per_phi });
    }

    for pi in &predictions {
        let parts: Vec<&URelation> = p.hypotheses.iter().filter_map(|h| relations.get(&hypothesis_relation(h.upsilon, &pi.attr))).collect();
        let u = union_all(prediction_name(&pi.attr), &parts)?;
        relations.insert(u.name.clone(), u);
    }
    relations.insert(y_exp.name.clone(), y_exp);

    Ok(Engine {
        world,
        relations,
        variables,
        phenomena: p.phenomena.clone(),
        explanation: p.explanation.clone(),
        hypotheses,
        predictions,
        history: Vec::new(),
    })
}

/// `Y{υ}[o]` for one phenomenon: one representative trial per combination
/// of the relevant factors' values, joined with its outputs, with every
/// relevant factor relation and with `Y[Exp]`, then projected onto
/// `(phi, upsilon, dims..., o)`.
#[allow(clippy::too_many_arguments)]
fn prediction_relation(
    inputs: &TrialInputs,
    outputs: &URelation,
    relevant: &[&FactorVar],
    y_exp: &URelation,
    phi: u64,
    upsilon: u64,
    attr: &str,
    dims: &[String],
) -> Result<URelation> {
    let params: Vec<&str> = relevant.iter().flat_map(|f| f.params.iter().map(String::as_str)).collect();
    let mut schema = vec![Attribute::id("tid"), Attribute::id(PHI)];
    schema.extend(params.iter().map(|p| Attribute::numeric(*p)));
    let mut reps = URelation::new("U", schema);

    let mut idx = vec![0usize; relevant.len()];
    loop {
        let values: Vec<f64> = relevant.iter().zip(&idx).flat_map(|(f, &i)| f.support[i].iter().copied()).collect();
        let tid = if relevant.is_empty() {
            inputs.rows.iter().map(|r| r.tid).min().expect("validated")
        } else {
            ingest::representative_tid(inputs, &params, &values).map_err(|_| PipelineError::MissingTrialForFactorValue {
                phi,
                upsilon,
                params: params.iter().map(|p| p.to_string()).collect(),
                values: values.clone(),
            })?
        };
        let mut row = vec![Value::Id(tid), Value::Id(phi)];
        row.extend(values.into_iter().map(Value::num));
        reps.push(Tuple::certain(row));

        let mut k = idx.len();
        let done = loop {
            if k == 0 {
                break true;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < relevant[k].support.len() {
                break false;
            }
            idx[k] = 0;
        };
        if done {
            break;
        }
    }

    let have: BTreeSet<u64> = outputs.tuples().iter().filter_map(|t| t.values[0].as_id()).collect();
    if let Some(t) = reps.tuples().iter().find(|t| !have.contains(&t.values[0].as_id().unwrap())) {
        return Err(PipelineError::MissingOutputForTrial { upsilon, tid: t.values[0].as_id().unwrap(), attr: attr.to_string() });
    }

    let mut joined = join(&reps, outputs, &[("tid", "tid"), (PHI, PHI)])?;
    for f in relevant {
        let mut on = vec![(PHI, PHI)];
        on.extend(f.params.iter().map(|q| (q.as_str(), q.as_str())));
        joined = join(&joined, &f.relation, &on)?;
    }
    joined = join(&joined, y_exp, &[(PHI, PHI), (UPSILON, UPSILON)])?;
    let mut keep = vec![PHI, UPSILON];
    keep.extend(dims.iter().map(String::as_str));
    keep.push(attr);
    Ok(project(&joined, &keep, false)?)
}

impl Engine {
    pub fn relation(&self, name: &str) -> Option<&URelation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = &URelation> {
        self.relations.values()
    }

    pub(crate) fn relations_mut(&mut self) -> impl Iterator<Item = &mut URelation> {
        self.relations.values_mut()
    }

    pub fn variables(&self) -> &[VariableRecord] {
        &self.variables
    }

    pub(crate) fn push_variable(&mut self, record: VariableRecord) {
        self.variables.push(record);
    }

    pub fn origin(&self, var: VarId) -> Option<&VariableOrigin> {
        self.variables.iter().find(|r| r.var == var).map(|r| &r.origin)
    }

    pub fn phenomena(&self) -> &[Phenomenon] {
        &self.phenomena
    }

    pub fn explanation(&self) -> &[Explanation] {
        &self.explanation
    }

    pub fn hypotheses(&self) -> &[HypothesisSynthesis] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, upsilon: u64) -> Option<&HypothesisSynthesis> {
        self.hypotheses.iter().find(|h| h.upsilon == upsilon)
    }

    pub fn predictions(&self) -> &[PredictionInfo] {
        &self.predictions
    }

    pub fn prediction(&self, attr: &str) -> Option<(&URelation, &PredictionInfo)> {
        let info = self.predictions.iter().find(|p| p.attr == attr)?;
        Some((self.relations.get(&prediction_name(attr))?, info))
    }

    /// Current probability of each hypothesis of `phi`, from `Y[Exp]`.
    pub fn hypothesis_confidence(&self, phi: u64) -> Result<Vec<(u64, f64)>> {
        let y_exp = &self.relations["Y[Exp]"];
        let sel = algebra::select(y_exp, &algebra::Predicate::eq(PHI, Value::Id(phi)))?;
        Ok(algebra::conf(&sel, &[UPSILON], &self.world)?.into_iter().map(|(k, p)| (k[0].as_id().unwrap(), p)).collect())
    }

    /// Parameter valuation a descriptor stands for under `(phi, upsilon)`:
    /// certain parameters plus every factor variable it assigns.
    pub fn parameters_of(&self, phi: u64, upsilon: u64, d: &Descriptor) -> Option<BTreeMap<String, f64>> {
        let ps = self.hypothesis(upsilon)?.phenomena.iter().find(|s| s.phi == phi)?;
        let mut out: BTreeMap<String, f64> = ps.factors.certain.iter().cloned().collect();
        for a in d.assignments() {
            if let Some(VariableOrigin::Factor { phi: fp, upsilon: fu, params, support }) = self.origin(a.var) {
                if *fp == phi && *fu == upsilon {
                    let values = support.get(a.value as usize - 1)?;
                    out.extend(params.iter().cloned().zip(values.iter().copied()));
                }
            }
        }
        Some(out)
    }
}
