//! Properties of the synthesized database on randomized projects.

use std::collections::{BTreeMap, BTreeSet};

use hypodb_core::algebra::conf;
use hypodb_core::analytics::{condition, writeback_posteriors, Observation};
use hypodb_core::fd::{Fd, SchemeKind};
use hypodb_core::ingest::{OutputRow, OutputSeries, TrialInput, TrialInputs};
use hypodb_core::model::{parse_model, HypothesisModel};
use hypodb_core::pipeline::{build, Engine, Explanation, Hypothesis, Phenomenon, Project, Settings, Trials};
use hypodb_core::relation::Value;
use proptest::prelude::*;

const TEMPLATES: [&str; 3] = [
    "param g, v0, s0; dim t; out a = -g; out v = -g * t + v0; out s = -(g / 2) * t^2 + v0 * t + s0;",
    "param g, D, s0; dim t; out a = 0; out v = -sqrt(g * D / 4.6e-4); out s = -t * sqrt(g * D / 4.6e-4) + s0;",
    "param g, D, s0; dim t; out a = 0; out v = -g * D^2 / 3.29e-6; out s = -(g * D^2 / 3.29e-6) * t + s0;",
];

fn model(template: usize, upsilon: u64) -> HypothesisModel {
    parse_model(&format!("hypothesis h{upsilon} {{ id = {upsilon}; {} }}", TEMPLATES[template])).unwrap()
}

/// Per parameter: its distinct values and how many trials repeat each.
type Plan = Vec<Vec<(f64, usize)>>;

#[derive(Debug, Clone)]
struct Spec {
    phenomena: usize,
    /// Template per hypothesis.
    templates: Vec<usize>,
    /// Per phenomenon, per hypothesis: prior weight if explained.
    links: Vec<Vec<Option<u32>>>,
    /// Per phenomenon and hypothesis.
    plans: Vec<Vec<Plan>>,
}

fn arb_plan() -> impl Strategy<Value = Plan> {
    let param = |base: f64, step: f64| {
        prop::collection::vec(1usize..=2, 1..=3)
            .prop_map(move |reps| reps.into_iter().enumerate().map(|(i, r)| (base + step * i as f64, r)).collect::<Vec<_>>())
    };
    (param(32.0, 0.2), param(0.0005, 0.0005), param(5000.0, 100.0)).prop_map(|(a, b, c)| vec![a, b, c])
}

fn arb_spec() -> impl Strategy<Value = Spec> {
    (1usize..=2, prop::collection::vec(0usize..3, 1..=3)).prop_flat_map(|(phenomena, templates)| {
        let h = templates.len();
        let link = prop::collection::vec(prop::option::weighted(0.7, 1u32..10), h).prop_map(|mut l| {
            if l.iter().all(Option::is_none) {
                l[0] = Some(1);
            }
            l
        });
        (
            Just(phenomena),
            Just(templates),
            prop::collection::vec(link, phenomena),
            prop::collection::vec(prop::collection::vec(arb_plan(), h), phenomena),
        )
            .prop_map(|(phenomena, templates, links, plans)| Spec { phenomena, templates, links, plans })
    })
}

fn cross(plan: &Plan) -> Vec<Vec<f64>> {
    let mut rows = vec![Vec::new()];
    for values in plan {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                values.iter().flat_map(move |&(v, reps)| {
                    let r = r.clone();
                    (0..reps).map(move |_| {
                        let mut r = r.clone();
                        r.push(v);
                        r
                    })
                })
            })
            .collect();
    }
    rows
}

fn project_of(spec: &Spec) -> Project {
    let phenomena = (1..=spec.phenomena as u64).map(|phi| Phenomenon { phi, description: format!("phenomenon {phi}") }).collect();
    let mut hypotheses = Vec::new();
    let mut explanation = Vec::new();
    let mut trials = Vec::new();
    let grid: Vec<BTreeMap<String, f64>> = (0..3).map(|t| BTreeMap::from([("t".to_string(), t as f64)])).collect();
    let mut tid = 0;
    for (h, &template) in spec.templates.iter().enumerate() {
        let upsilon = h as u64 + 1;
        let m = model(template, upsilon);
        let mut inputs = TrialInputs { params: m.params().to_vec(), rows: Vec::new() };
        let mut outputs: Vec<OutputSeries> =
            m.outputs().iter().map(|o| OutputSeries { attr: o.name.clone(), dims: vec!["t".into()], rows: Vec::new() }).collect();
        for phi in 1..=spec.phenomena as u64 {
            if spec.links[phi as usize - 1][h].is_none() {
                continue;
            }
            for values in cross(&spec.plans[phi as usize - 1][h]) {
                tid += 1;
                inputs.rows.push(TrialInput { tid, phi, values: values.clone() });
                let binding = m.params().iter().cloned().zip(values).collect();
                let table = m.evaluate(&binding, &grid).unwrap();
                for s in outputs.iter_mut() {
                    for (t, v) in table.column(&s.attr).unwrap().into_iter().enumerate() {
                        s.rows.push(OutputRow { tid, phi, upsilon, dims: vec![t as f64], value: v });
                    }
                }
            }
        }
        trials.push(Trials { upsilon, inputs, outputs });
        hypotheses.push(Hypothesis { upsilon, model: m });
    }
    for (p, links) in spec.links.iter().enumerate() {
        let total: u32 = links.iter().flatten().sum();
        for (h, w) in links.iter().enumerate() {
            if let Some(w) = w {
                explanation.push(Explanation { phi: p as u64 + 1, upsilon: h as u64 + 1, conf: *w as f64 / total as f64 });
            }
        }
    }
    Project { phenomena, hypotheses, explanation, trials, settings: Settings::default() }
}

fn prior(p: &Project, phi: u64, upsilon: u64) -> f64 {
    p.explanation.iter().find(|e| e.phi == phi && e.upsilon == upsilon).map_or(0.0, |e| e.conf)
}

fn check_normalization(e: &Engine, p: &Project) -> Result<(), TestCaseError> {
    for pi in e.predictions() {
        let (r, _) = e.prediction(&pi.attr).unwrap();
        let mut by = vec!["phi"];
        by.extend(pi.dims.iter().map(String::as_str));
        let groups = conf(r, &by, &e.world).unwrap();
        prop_assert_eq!(groups.len(), p.phenomena.len() * if pi.dims.is_empty() { 1 } else { 3 });
        for (k, c) in groups {
            prop_assert!((c - 1.0).abs() < 1e-9, "{} {k:?}: {c}", pi.attr);
        }
        by.push("upsilon");
        for (k, c) in conf(r, &by, &e.world).unwrap() {
            let want = prior(p, k[0].as_id().unwrap(), k.last().unwrap().as_id().unwrap());
            prop_assert!((c - want).abs() < 1e-9);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confidences_are_normalized_per_phenomenon(spec in arb_spec()) {
        let p = project_of(&spec);
        let e = build(&p).unwrap();
        check_normalization(&e, &p)?;
        for r in e.relations() {
            prop_assert!(r.is_well_formed(&e.world), "{}", r.name);
        }
    }

    #[test]
    fn prediction_relations_follow_their_factors(spec in arb_spec()) {
        let p = project_of(&spec);
        let e = build(&p).unwrap();
        for h in e.hypotheses() {
            let u = h.upsilon;
            for ps in &h.phenomena {
                for f in &ps.factors.factors {
                    prop_assert_eq!(f.frequencies.iter().sum::<u64>() as usize, p.trials[u as usize - 1].inputs.for_phenomenon(ps.phi).rows.len());
                    prop_assert!(f.params.iter().all(|q| !ps.factors.is_certain(q)));
                }
                let uncertain: BTreeSet<&String> = h.model.params().iter().filter(|q| !ps.factors.is_certain(q)).collect();
                let covered: Vec<&String> = ps.factors.factors.iter().flat_map(|f| &f.params).collect();
                prop_assert_eq!(covered.len(), uncertain.len());
                prop_assert_eq!(covered.into_iter().collect::<BTreeSet<_>>(), uncertain);

                for scheme in ps.schemes.iter().filter(|s| s.kind == SchemeKind::Prediction) {
                    let attr = scheme.name.rsplit('[').next().unwrap().trim_end_matches(']').to_string();
                    let (reached, _) = h.model.reachable_inputs(&attr);
                    let want: BTreeSet<String> = reached.into_iter().filter(|q| !ps.factors.is_certain(q)).collect();
                    prop_assert_eq!(&scheme.uncertainty_deps, &want);
                    prop_assert!(h.fds.implies(&Fd::from_sets(scheme.key.clone(), BTreeSet::from([attr.clone()]))).unwrap());

                    let expected: usize = ps
                        .factors
                        .factors
                        .iter()
                        .filter(|f| f.params.iter().any(|q| want.contains(q)))
                        .map(|f| f.support.len())
                        .product();
                    let rel = e.relation(&scheme.name).unwrap();
                    let dims = &e.predictions().iter().find(|pi| pi.attr == attr).unwrap().dims;
                    let mut per_valuation: BTreeMap<Vec<Value>, usize> = BTreeMap::new();
                    for t in rel.tuples().iter().filter(|t| t.values[0] == Value::Id(ps.phi)) {
                        *per_valuation.entry(t.values[2..2 + dims.len()].to_vec()).or_default() += 1;
                    }
                    prop_assert!(!per_valuation.is_empty());
                    for n in per_valuation.values() {
                        prop_assert_eq!(*n, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn predictions_round_trip_through_the_evaluator(spec in arb_spec()) {
        let p = project_of(&spec);
        let e = build(&p).unwrap();
        for pi in e.predictions() {
            let (r, _) = e.prediction(&pi.attr).unwrap();
            for t in r.tuples() {
                let phi = t.values[0].as_id().unwrap();
                let u = t.values[1].as_id().unwrap();
                let m = &e.hypothesis(u).unwrap().model;
                let mut params = e.parameters_of(phi, u, &t.descriptor).unwrap();
                for q in m.params() {
                    params.entry(q.clone()).or_insert(f64::NAN);
                }
                let mut grid: BTreeMap<String, f64> =
                    pi.dims.iter().enumerate().map(|(i, d)| (d.clone(), t.values[2 + i].as_f64().unwrap())).collect();
                for d in m.dims() {
                    grid.entry(d.clone()).or_insert(f64::NAN);
                }
                let v = m.evaluate(&params, &[grid]).unwrap().column(&pi.attr).unwrap()[0];
                prop_assert_eq!(Value::num(v), t.values.last().unwrap().clone());
            }
        }
    }

    #[test]
    fn writeback_is_faithful(spec in arb_spec(), y in 4900.0f64..5100.0, sigma in 5.0f64..200.0, t in 0u32..3) {
        let p = project_of(&spec);
        let mut e = build(&p).unwrap();
        let obs = Observation {
            attr: "s".into(),
            dims: BTreeMap::from([("t".to_string(), t as f64)]),
            y,
            sigma,
        };
        let rows = condition(&e, 1, &obs).unwrap();
        writeback_posteriors(&mut e, &obs, &rows).unwrap();
        let after = condition(&e, 1, &Observation { sigma: 1e300, ..obs.clone() }).unwrap();
        for r in &rows {
            let a = after.iter().find(|x| x.upsilon == r.upsilon && x.value == r.value).unwrap();
            prop_assert!((a.prior - r.posterior.unwrap()).abs() < 1e-9);
        }
        let world_ok = e.world.variables().all(|(_, v)| (v.marginals().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(world_ok);
        for pi in e.predictions() {
            let (r, _) = e.prediction(&pi.attr).unwrap();
            let mut by = vec!["phi"];
            by.extend(pi.dims.iter().map(String::as_str));
            for (_, c) in conf(r, &by, &e.world).unwrap() {
                prop_assert!((c - 1.0).abs() < 1e-9);
            }
        }
        for r in e.relations() {
            prop_assert!(r.is_well_formed(&e.world), "{}", r.name);
        }
    }
}
