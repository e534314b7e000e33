//! Ranking of predictions by confidence, Bayesian conditioning of the ranks
//! on observed values under a normal error model, and write-back of the
//! posteriors into the world table.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{self, AlgebraError, CmpOp, Operand, Predicate};
use crate::pipeline::{Engine, VariableOrigin, VariableRecord};
use crate::relation::{Tuple, Value, PHI, UPSILON};
use crate::worldset::{pairwise_exclusive, Assignment, Descriptor, VarId, WorldError};

/// Prior sums accepted by [`bayes_condition`].
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-6;
/// Probability mass the conditioned tuples must cover for write-back.
pub const COVERAGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("unknown prediction attribute `{0}`")]
    UnknownAttribute(String),
    #[error("`{attr}` has no dimension `{dim}`")]
    UnknownDimension { attr: String, dim: String },
    #[error("`{attr}` needs a value for dimension `{dim}`")]
    MissingDimension { attr: String, dim: String },
    #[error("selection is empty")]
    EmptySelection,
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("observed value must be finite, got {0}")]
    InvalidObservation(f64),
    #[error("priors of phenomenon {phi} sum to {}, expected 1", (sum * 1e9).round() / 1e9)]
    PriorNotNormalized { phi: u64, sum: f64 },
    #[error("every weighted likelihood is zero")]
    DegenerateLikelihood,
    #[error("rows span several phenomena")]
    MixedPhenomena,
    #[error("no posterior for ({phi}, {upsilon}, {value})")]
    MissingPosterior { phi: u64, upsilon: u64, value: f64 },
    #[error("conditioned tuples are not mutually exclusive")]
    OverlappingSelection,
    #[error("conditioned tuples cover probability {mass}, not 1")]
    PartialCoverage { mass: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    World(#[from] WorldError),
}

impl AnalyticsError {
    pub fn is_validation(&self) -> bool {
        matches!(self, AnalyticsError::InvalidSigma(_) | AnalyticsError::InvalidObservation(_) | AnalyticsError::PriorNotNormalized { .. })
    }
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub phi: u64,
    pub upsilon: u64,
    pub value: f64,
    pub prior: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub attr: String,
    #[serde(default)]
    pub dims: BTreeMap<String, f64>,
    pub y: f64,
    pub sigma: f64,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(AnalyticsError::InvalidSigma(self.sigma));
        }
        if !self.y.is_finite() {
            return Err(AnalyticsError::InvalidObservation(self.y));
        }
        Ok(())
    }
}

/// A committed conditioning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningStep {
    pub step: usize,
    pub phi: u64,
    pub observation: Observation,
    pub rows: Vec<RankedPrediction>,
    /// `None` when the conditioned tuples were certain.
    pub compound: Option<VarId>,
    pub retired: Vec<VarId>,
}

fn by_rank(key: impl Fn(&RankedPrediction) -> f64) -> impl Fn(&RankedPrediction, &RankedPrediction) -> Ordering {
    move |a, b| key(b).total_cmp(&key(a)).then(a.phi.cmp(&b.phi)).then(a.upsilon.cmp(&b.upsilon)).then(a.value.total_cmp(&b.value))
}

fn selection(engine: &Engine, phi: u64, attr: &str, dims: &BTreeMap<String, f64>) -> Result<Vec<Tuple>> {
    let (rel, info) = engine.prediction(attr).ok_or_else(|| AnalyticsError::UnknownAttribute(attr.to_string()))?;
    if let Some(d) = dims.keys().find(|d| !info.dims.contains(*d)) {
        return Err(AnalyticsError::UnknownDimension { attr: attr.to_string(), dim: d.clone() });
    }
    let mut pred = Predicate::eq(PHI, Value::Id(phi));
    for d in &info.dims {
        let v = dims.get(d).ok_or_else(|| AnalyticsError::MissingDimension { attr: attr.to_string(), dim: d.clone() })?;
        pred = pred.and(d.clone(), CmpOp::Eq, Operand::Const(Value::num(*v)));
    }
    let sel = algebra::select(rel, &pred)?;
    if sel.is_empty() {
        return Err(AnalyticsError::EmptySelection);
    }
    Ok(sel.tuples().to_vec())
}

/// `select phi, upsilon, attr, conf() from Y[attr] where dims group by
/// phi, upsilon, attr`, by descending confidence.
pub fn rank_predictions(engine: &Engine, phi: u64, attr: &str, dims: &BTreeMap<String, f64>) -> Result<Vec<RankedPrediction>> {
    let (rel, _) = engine.prediction(attr).ok_or_else(|| AnalyticsError::UnknownAttribute(attr.to_string()))?;
    let mut sel = crate::relation::URelation::new(rel.name.clone(), rel.schema().to_vec());
    for t in selection(engine, phi, attr, dims)? {
        sel.push(t);
    }
    let groups = algebra::conf(&sel, &[PHI, UPSILON, attr], &engine.world)?;
    let mut rows: Vec<RankedPrediction> = groups
        .into_iter()
        .map(|(k, prior)| RankedPrediction {
            phi: k[0].as_id().unwrap(),
            upsilon: k[1].as_id().unwrap(),
            value: k[2].as_f64().unwrap(),
            prior,
            posterior: None,
        })
        .collect();
    rows.sort_by(by_rank(|r| r.prior));
    Ok(rows)
}

/// Log of the normal density of `y` around `mu`, without the constant
/// `-ln(sigma * sqrt(2 pi))`, which cancels in the posterior.
pub fn log_likelihood(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -0.5 * z * z
}

/// Posterior over `rows` given independent observations of the same
/// quantity, each with its own standard deviation.
pub fn bayes_condition_all(rows: &[RankedPrediction], obs: &[Observation]) -> Result<Vec<RankedPrediction>> {
    for o in obs {
        o.validate()?;
    }
    if rows.is_empty() {
        return Err(AnalyticsError::EmptySelection);
    }
    let mut sums: BTreeMap<u64, f64> = BTreeMap::new();
    for r in rows {
        *sums.entry(r.phi).or_default() += r.prior;
    }
    for (&phi, &sum) in &sums {
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(AnalyticsError::PriorNotNormalized { phi, sum });
        }
    }

    let log_w: Vec<f64> = rows
        .iter()
        .map(|r| {
            let ll: f64 = obs.iter().map(|o| log_likelihood(o.y, r.value, o.sigma)).sum();
            ll + r.prior.ln()
        })
        .collect();
    let mut out = rows.to_vec();
    for &phi in sums.keys() {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].phi == phi).collect();
        let max = idx.iter().map(|&i| log_w[i]).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(AnalyticsError::DegenerateLikelihood);
        }
        let w: Vec<f64> = idx.iter().map(|&i| (log_w[i] - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for (&i, wi) in idx.iter().zip(w) {
            out[i].posterior = Some(wi / total);
        }
    }
    out.sort_by(by_rank(|r| r.posterior.unwrap()));
    Ok(out)
}

pub fn bayes_condition(rows: &[RankedPrediction], obs: &Observation) -> Result<Vec<RankedPrediction>> {
    bayes_condition_all(rows, std::slice::from_ref(obs))
}

/// Ranks `obs.attr` for `phi` and conditions the ranking on `obs`.
pub fn condition(engine: &Engine, phi: u64, obs: &Observation) -> Result<Vec<RankedPrediction>> {
    obs.validate()?;
    let rows = rank_predictions(engine, phi, &obs.attr, &obs.dims)?;
    bayes_condition(&rows, obs)
}

/// Installs the posteriors of `rows` into the world table.
///
/// The variables `V` mentioned by the conditioned tuples become correlated,
/// so they are replaced by one compound variable `z` whose values are the
/// distinct conditioned descriptors (the blocks). Each block receives its
/// row's posterior, split among the row's blocks in proportion to their
/// prior probability. Every descriptor that mentions `V` is rewritten into
/// one tuple per block it is consistent with; variables of `V` that a
/// block leaves unassigned stay in place, and those no longer referenced
/// are retired.
pub fn writeback_posteriors(engine: &mut Engine, obs: &Observation, rows: &[RankedPrediction]) -> Result<ConditioningStep> {
    let phi = rows.first().ok_or(AnalyticsError::EmptySelection)?.phi;
    if rows.iter().any(|r| r.phi != phi) {
        return Err(AnalyticsError::MixedPhenomena);
    }
    let posterior: BTreeMap<(u64, Value), f64> = rows
        .iter()
        .map(|r| {
            let p = r.posterior.ok_or(AnalyticsError::MissingPosterior { phi: r.phi, upsilon: r.upsilon, value: r.value })?;
            Ok(((r.upsilon, Value::num(r.value)), p))
        })
        .collect::<Result<_>>()?;

    let tuples = selection(engine, phi, &obs.attr, &obs.dims)?;
    let mut blocks: Vec<(Descriptor, (u64, Value))> = Vec::new();
    for t in &tuples {
        let key = (t.values[1].as_id().unwrap(), t.values.last().unwrap().clone());
        if !posterior.contains_key(&key) {
            return Err(AnalyticsError::MissingPosterior { phi, upsilon: key.0, value: key.1.as_f64().unwrap() });
        }
        match blocks.iter().find(|(d, _)| *d == t.descriptor) {
            Some((_, k)) if *k == key => {}
            Some(_) => return Err(AnalyticsError::OverlappingSelection),
            None => blocks.push((t.descriptor.clone(), key)),
        }
    }
    let vars: BTreeSet<VarId> = blocks.iter().flat_map(|(d, _)| d.vars()).collect();
    let step = engine.history.len() + 1;
    let mut record = ConditioningStep { step, phi, observation: obs.clone(), rows: rows.to_vec(), compound: None, retired: Vec::new() };
    if vars.is_empty() {
        engine.history.push(record.clone());
        return Ok(record);
    }

    let descriptors: Vec<Descriptor> = blocks.iter().map(|(d, _)| d.clone()).collect();
    if !pairwise_exclusive(&descriptors) {
        return Err(AnalyticsError::OverlappingSelection);
    }
    let probs = descriptors.iter().map(|d| engine.world.descriptor_probability(d)).collect::<std::result::Result<Vec<f64>, _>>()?;
    let mass: f64 = probs.iter().sum();
    if (mass - 1.0).abs() > COVERAGE_TOLERANCE {
        return Err(AnalyticsError::PartialCoverage { mass });
    }

    let mut row_mass: BTreeMap<&(u64, Value), f64> = BTreeMap::new();
    for ((_, key), p) in blocks.iter().zip(&probs) {
        *row_mass.entry(key).or_default() += p;
    }
    let mut weights: Vec<f64> = blocks
        .iter()
        .zip(&probs)
        .map(|((_, key), p)| {
            let m = row_mass[key];
            if m > 0.0 {
                posterior[key] * p / m
            } else {
                0.0
            }
        })
        .collect();

    // Descriptors consistent with no block live in probability-0 worlds;
    // they map to a zero-mass sink value so they are not lost.
    let needs_sink = engine.relations().any(|r| {
        r.tuples().iter().any(|t| {
            let (inside, _) = t.descriptor.partition_by(&vars);
            !inside.is_empty() && descriptors.iter().all(|b| b.excludes(&inside))
        })
    });
    let sink = needs_sink.then(|| {
        weights.push(0.0);
        weights.len() as u32
    });
    let z = engine.world.register_compound(&weights)?;

    for rel in engine.relations_mut() {
        let mut rewritten = Vec::with_capacity(rel.len());
        for t in rel.tuples() {
            let (inside, outside) = t.descriptor.partition_by(&vars);
            if inside.is_empty() {
                rewritten.push(t.clone());
                continue;
            }
            let mut matched = false;
            for (k, block) in descriptors.iter().enumerate() {
                if block.excludes(&inside) {
                    continue;
                }
                matched = true;
                let residual = inside.assignments().iter().filter(|a| block.value_of(a.var).is_none()).copied();
                let d = Descriptor::new(residual.chain(outside.assignments().iter().copied()).chain([Assignment::new(z, k as u32 + 1)]));
                rewritten.push(Tuple::new(t.values.clone(), d));
            }
            if !matched {
                let d = Descriptor::new(outside.assignments().iter().copied().chain([Assignment::new(z, sink.unwrap())]));
                rewritten.push(Tuple::new(t.values.clone(), d));
            }
        }
        *rel.tuples_mut() = rewritten;
    }

    let still_used: BTreeSet<VarId> = engine.relations().flat_map(|r| r.referenced_vars()).collect();
    for v in &vars {
        if !still_used.contains(v) {
            engine.world.retire(*v);
            record.retired.push(*v);
        }
    }
    engine.push_variable(VariableRecord {
        var: z,
        origin: VariableOrigin::Compound { step, replaced: vars.into_iter().collect(), blocks: descriptors },
    });
    record.compound = Some(z);
    engine.history.push(record.clone());
    Ok(record)
}
