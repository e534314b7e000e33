//! Programmatic free-fall project shared by unit tests.

use std::collections::BTreeMap;

use crate::ingest::{OutputRow, OutputSeries, TrialInput, TrialInputs};
use crate::model::{parse_model, HypothesisModel};
use crate::pipeline::{Explanation, Hypothesis, Phenomenon, Project, Settings, Trials};

pub const H1: &str = r#"
hypothesis "Law of free fall" {
    id = 1;
    param g, v0, s0;
    dim t;
    out a = -g;
    out v = -g * t + v0;
    out s = -(g / 2) * t^2 + v0 * t + s0;
}
"#;

pub const H2: &str = r#"
hypothesis "Stokes' law" {
    id = 2;
    param g, D, s0;
    dim t;
    out a = 0;
    out v = -sqrt(g * D / 4.6e-4);
    out s = -t * sqrt(g * D / 4.6e-4) + s0;
}
"#;

pub const H3: &str = r#"
hypothesis "Velocity-squared law" {
    id = 3;
    param g, D, s0;
    dim t;
    out a = 0;
    out v = -g * D^2 / 3.29e-6;
    out s = -(g * D^2 / 3.29e-6) * t + s0;
}
"#;

/// Trials for every row of `params` on phenomenon 1, outputs from the
/// evaluator at t = 0..4.
pub fn trials(model: &HypothesisModel, upsilon: u64, params: &[Vec<f64>]) -> Trials {
    let grid: Vec<BTreeMap<String, f64>> = (0..5).map(|t| BTreeMap::from([("t".to_string(), t as f64)])).collect();
    let mut inputs = TrialInputs { params: model.params().to_vec(), rows: Vec::new() };
    let mut outputs: Vec<OutputSeries> = model
        .outputs()
        .iter()
        .map(|o| OutputSeries { attr: o.name.clone(), dims: if o.name == "a" { Vec::new() } else { vec!["t".into()] }, rows: Vec::new() })
        .collect();
    for (i, values) in params.iter().enumerate() {
        let tid = i as u64 + 1;
        inputs.rows.push(TrialInput { tid, phi: 1, values: values.clone() });
        let binding = model.params().iter().cloned().zip(values.iter().copied()).collect();
        let table = model.evaluate(&binding, &grid).unwrap();
        for s in outputs.iter_mut() {
            let col = table.column(&s.attr).unwrap();
            if s.dims.is_empty() {
                s.rows.push(OutputRow { tid, phi: 1, upsilon, dims: Vec::new(), value: col[0] });
            } else {
                for (t, v) in col.into_iter().enumerate() {
                    s.rows.push(OutputRow { tid, phi: 1, upsilon, dims: vec![t as f64], value: v });
                }
            }
        }
    }
    Trials { upsilon, inputs, outputs }
}

fn cross(a: &[f64], b: &[f64], s0: f64) -> Vec<Vec<f64>> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y, s0])).collect()
}

pub fn fall_project() -> Project {
    let h1 = parse_model(H1).unwrap();
    let h2 = parse_model(H2).unwrap();
    let h3 = parse_model(H3).unwrap();
    let trials = vec![
        trials(&h1, 1, &cross(&[32.0, 32.2], &[0.0, 10.0, 20.0], 5000.0)),
        trials(&h2, 2, &cross(&[32.0, 32.2], &[0.0014375, 0.002], 5000.0)),
        trials(&h3, 3, &cross(&[32.0, 32.2], &[0.0004, 0.0005], 5000.0)),
    ];
    Project {
        phenomena: vec![Phenomenon { phi: 1, description: "Effects of gravity on an object falling on Earth".into() }],
        hypotheses: vec![Hypothesis { upsilon: 1, model: h1 }, Hypothesis { upsilon: 2, model: h2 }, Hypothesis { upsilon: 3, model: h3 }],
        explanation: vec![
            Explanation { phi: 1, upsilon: 1, conf: 0.6 },
            Explanation { phi: 1, upsilon: 2, conf: 0.2 },
            Explanation { phi: 1, upsilon: 3, conf: 0.2 },
        ],
        trials,
        settings: Settings::default(),
    }
}
