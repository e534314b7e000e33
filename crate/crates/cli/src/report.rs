//! Views shared by the command line and the HTTP API, and their text
//! rendering.

use std::collections::BTreeMap;
use std::fmt::Write;

use hypodb_core::analytics::ConditioningStep;
use hypodb_core::fd::RelationScheme;
use hypodb_core::ingest::LearnedFactors;
use hypodb_core::pipeline::VariableOrigin;
use hypodb_core::{Engine, RankedPrediction};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisView {
    pub phi: u64,
    pub upsilon: u64,
    pub name: String,
    /// Prior confidence from the explanation.
    pub prior: f64,
    /// Current confidence, after committed conditioning steps.
    pub conf: f64,
}

pub fn hypotheses(engine: &Engine, phi: Option<u64>) -> Vec<HypothesisView> {
    let mut out = Vec::new();
    for p in engine.phenomena().iter().filter(|p| phi.is_none_or(|f| f == p.phi)) {
        let conf: BTreeMap<u64, f64> = engine.hypothesis_confidence(p.phi).expect("Y[Exp] is well formed").into_iter().collect();
        for e in engine.explanation().iter().filter(|e| e.phi == p.phi) {
            out.push(HypothesisView {
                phi: e.phi,
                upsilon: e.upsilon,
                name: engine.hypothesis(e.upsilon).map_or_else(String::new, |h| h.name().to_string()),
                prior: e.conf,
                conf: conf.get(&e.upsilon).copied().unwrap_or(0.0),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableView<'a> {
    pub var: u32,
    pub name: String,
    pub marginals: &'a [f64],
    pub compound: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<&'a VariableOrigin>,
}

pub fn world_table(engine: &Engine) -> Vec<VariableView<'_>> {
    engine
        .world
        .variables()
        .map(|(id, v)| VariableView {
            var: id.0,
            name: id.to_string(),
            marginals: v.marginals(),
            compound: v.is_compound(),
            origin: engine.origin(id),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhenomenonReport<'a> {
    pub phi: u64,
    pub factors: &'a LearnedFactors,
    pub schemes: &'a [RelationScheme],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport<'a> {
    pub upsilon: u64,
    pub name: &'a str,
    pub fds: Vec<String>,
    pub normalized: &'a [RelationScheme],
    pub phenomena: Vec<PhenomenonReport<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisReport<'a> {
    pub hypotheses: Vec<HypothesisReport<'a>>,
    pub variables: Vec<VariableView<'a>>,
}

pub fn synthesis(engine: &Engine) -> SynthesisReport<'_> {
    SynthesisReport {
        hypotheses: engine
            .hypotheses()
            .iter()
            .map(|h| HypothesisReport {
                upsilon: h.upsilon,
                name: h.name(),
                fds: h.fds.fds().iter().map(ToString::to_string).collect(),
                normalized: &h.normalized,
                phenomena: h.phenomena.iter().map(|p| PhenomenonReport { phi: p.phi, factors: &p.factors, schemes: &p.schemes }).collect(),
            })
            .collect(),
        variables: world_table(engine),
    }
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

pub fn render_variables(vars: &[VariableView<'_>]) -> String {
    let mut s = String::new();
    for v in vars {
        let origin = match v.origin {
            Some(VariableOrigin::Explanation { phi, hypotheses }) => {
                format!("hypothesis choice for phi={phi} over {hypotheses:?}")
            }
            Some(VariableOrigin::Factor { phi, upsilon, params, support }) => {
                let values: Vec<String> = support.iter().map(|s| format!("({})", fmt_values(s))).collect();
                format!("factor {{{}}} of H{upsilon}, phi={phi}: {}", params.join(", "), values.join(" "))
            }
            Some(VariableOrigin::Compound { step, replaced, .. }) => {
                let r: Vec<String> = replaced.iter().map(ToString::to_string).collect();
                format!("compound of step {step} over {}", r.join(", "))
            }
            None => String::new(),
        };
        let m: Vec<String> = v.marginals.iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(s, "  {:<4} [{}]  {}", v.name, m.join(", "), origin);
    }
    s
}

pub fn render_synthesis(r: &SynthesisReport<'_>) -> String {
    let mut s = String::new();
    for h in &r.hypotheses {
        let _ = writeln!(s, "H{} {}", h.upsilon, h.name);
        let _ = writeln!(s, "  functional dependencies:");
        for fd in &h.fds {
            let _ = writeln!(s, "    {fd}");
        }
        let _ = writeln!(s, "  3NF schemes:");
        for scheme in h.normalized {
            let _ = writeln!(s, "    {scheme}");
        }
        for p in &h.phenomena {
            let _ = writeln!(s, "  phi={}:", p.phi);
            for (name, value) in &p.factors.certain {
                let _ = writeln!(s, "    certain {name} = {value}");
            }
            for f in &p.factors.factors {
                let _ = writeln!(
                    s,
                    "    factor {{{}}} with {} values over {} trials",
                    f.params.join(", "),
                    f.support.len(),
                    f.frequencies.iter().sum::<u64>()
                );
            }
            for scheme in p.schemes {
                let _ = writeln!(s, "    {scheme}");
            }
        }
    }
    let _ = writeln!(s, "world table:");
    s.push_str(&render_variables(&r.variables));
    s
}

pub fn render_ranking(rows: &[RankedPrediction]) -> String {
    let with_posterior = rows.iter().any(|r| r.posterior.is_some());
    let mut s = String::new();
    let _ = write!(s, "{:>4} {:>7} {:>20} {:>12}", "phi", "upsilon", "value", "prior");
    if with_posterior {
        let _ = write!(s, " {:>12}", "posterior");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:>4} {:>7} {:>20} {:>12.6}", r.phi, r.upsilon, r.value, r.prior);
        if let Some(p) = r.posterior {
            let _ = write!(s, " {p:>12.6}");
        }
        s.push('\n');
    }
    s
}

pub fn render_history(steps: &[ConditioningStep]) -> String {
    if steps.is_empty() {
        return "no committed observations\n".to_string();
    }
    let mut s = String::new();
    for st in steps {
        let o = &st.observation;
        let dims: Vec<String> = o.dims.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = write!(s, "step {}: phi={} {}[{}] y={} sigma={}", st.step, st.phi, o.attr, dims.join(", "), o.y, o.sigma);
        match st.compound {
            Some(z) => {
                let r: Vec<String> = st.retired.iter().map(ToString::to_string).collect();
                let _ = writeln!(s, " -> {z}, retired [{}]", r.join(", "));
            }
            None => s.push_str(" -> no uncertain variables\n"),
        }
    }
    s
}
