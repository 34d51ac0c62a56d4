#![allow(dead_code)]

use cyclic_pls::dataset::{prepare_blocks, MissingPolicy, PreparedData};
use cyclic_pls::modelspec::{parse_model, ModelSpec};
use cyclic_pls::simgen::{gen_acyclic, ConstructSpec, Measurement, PopulationPath, PopulationSpec};

pub fn reflective(name: &str, loadings: &[f64]) -> ConstructSpec {
    ConstructSpec {
        name: name.into(),
        measurement: Measurement::Reflective {
            loadings: loadings.to_vec(),
        },
    }
}

pub fn single(name: &str) -> ConstructSpec {
    ConstructSpec {
        name: name.into(),
        measurement: Measurement::SingleItem,
    }
}

pub fn population(constructs: Vec<ConstructSpec>, paths: &[(&str, &str, f64)], n: usize, seed: u64) -> PopulationSpec {
    PopulationSpec {
        constructs,
        paths: paths
            .iter()
            .map(|&(s, t, c)| PopulationPath {
                source: s.into(),
                target: t.into(),
                coefficient: c,
            })
            .collect(),
        disturbance_variances: None,
        n,
        seed,
        generator: None,
    }
}

/// Model mirroring a population: multi-indicator blocks get `mode`, one-column
/// blocks are single-item.
pub fn model_for(pop: &PopulationSpec, mode: &str, cyclic: Option<(&str, &[&str])>) -> ModelSpec {
    let blocks: Vec<String> = pop
        .constructs
        .iter()
        .map(|c| {
            let cols: Vec<String> = match &c.measurement {
                Measurement::SingleItem => vec![c.name.clone()],
                m => (1..=m.width()).map(|j| format!("{}_{j}", c.name)).collect(),
            };
            let mode = if cols.len() == 1 { "single-item" } else { mode };
            format!(r#"{{"name": "{}", "mode": "{mode}", "indicators": {:?}}}"#, c.name, cols)
        })
        .collect();
    let paths: Vec<String> = pop
        .paths
        .iter()
        .map(|p| format!(r#"{{"source": "{}", "target": "{}"}}"#, p.source, p.target))
        .collect();
    let cyclic = cyclic.map_or_else(String::new, |(s, t)| {
        format!(r#", "cyclic": {{"source": "{s}", "targets": {t:?}}}"#)
    });
    parse_model(&format!(
        r#"{{"blocks": [{}], "paths": [{}]{cyclic}}}"#,
        blocks.join(", "),
        paths.join(", ")
    ))
    .expect("model document")
}

pub fn prepared(pop: &PopulationSpec, spec: &ModelSpec) -> PreparedData {
    let (raw, _) = gen_acyclic(pop).expect("population");
    prepare_blocks(&raw, spec, MissingPolicy::Listwise).expect("prepared data")
}

/// Two-pass Pearson correlation, independent of the library's moments.
pub fn naive_corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn column(raw: &cyclic_pls::dataset::RawTable, name: &str) -> Vec<f64> {
    let j = raw.column_index(name).expect("column");
    raw.rows.iter().map(|r| r[j].expect("complete")).collect()
}

pub const TRIANGLE: [(&str, &str, f64); 3] = [("A", "B", 0.5), ("A", "C", 0.2), ("B", "C", 0.6)];

pub fn three_reflective(n: usize, seed: u64) -> PopulationSpec {
    population(
        vec![
            reflective("A", &[0.8; 4]),
            reflective("B", &[0.8; 4]),
            reflective("C", &[0.8; 4]),
        ],
        &TRIANGLE,
        n,
        seed,
    )
}
