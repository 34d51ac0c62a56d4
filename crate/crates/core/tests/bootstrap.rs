mod common;

use common::{population, prepared, single};
use cyclic_pls::cyclic::CyclicOptions;
use cyclic_pls::dataset::PreparedData;
use cyclic_pls::modelspec::parse_model;
use cyclic_pls::plscore::{fit_pls, FitOptions};
use cyclic_pls::resample::{bootstrap, BootstrapError, BootstrapOptions, CoefficientId};
use nalgebra::DMatrix;

fn opts(replicates: usize, seed: u64) -> BootstrapOptions {
    BootstrapOptions {
        replicates,
        seed,
        ..BootstrapOptions::default()
    }
}

fn xy(n: usize, beta: f64, seed: u64) -> (cyclic_pls::modelspec::ModelSpec, PreparedData) {
    let pop = population(vec![single("X"), single("Y")], &[("X", "Y", beta)], n, seed);
    let spec = common::model_for(&pop, "reflective", None);
    let data = prepared(&pop, &spec);
    (spec, data)
}

fn path_xy() -> CoefficientId {
    CoefficientId::Path {
        source: "X".into(),
        target: "Y".into(),
    }
}

#[test]
fn se_matches_asymptotic_ols_error() {
    let (spec, data) = xy(5000, 0.6, 77);
    let boot = bootstrap(&data, &spec, &opts(500, 3)).unwrap();
    let se = boot.get(&path_xy()).unwrap().se;
    let analytic = (1.0 - 0.36) / 5000f64.sqrt();
    assert!((se - analytic).abs() / analytic < 0.2, "se {se} vs {analytic}");
}

#[test]
fn same_seed_same_result_and_estimates_untouched() {
    let (spec, data) = xy(400, 0.4, 8);
    let a = bootstrap(&data, &spec, &opts(150, 99)).unwrap();
    let b = bootstrap(&data, &spec, &opts(150, 99)).unwrap();
    assert_eq!(a, b);
    let c = bootstrap(&data, &spec, &opts(150, 100)).unwrap();
    assert_ne!(a, c);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    assert_eq!(a.get(&path_xy()).unwrap().estimate, fit.path("X", "Y").unwrap());
}

#[test]
fn thread_count_does_not_matter() {
    let (spec, data) = xy(300, 0.5, 4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap(&data, &spec, &opts(120, 5)).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn single_item_loading_is_degenerate() {
    let (spec, data) = xy(200, 0.5, 1);
    let boot = bootstrap(&data, &spec, &opts(100, 1)).unwrap();
    let l = boot
        .get(&CoefficientId::Loading {
            construct: "X".into(),
            indicator: "X".into(),
        })
        .unwrap();
    assert_eq!(l.se, 0.0);
    assert_eq!(l.ci, (1.0, 1.0));
    assert!(l.replicates.iter().all(|&v| v == 1.0));
}

#[test]
fn intervals_are_ordered_and_flag_significance() {
    let (spec, data) = xy(500, 0.5, 12);
    let boot = bootstrap(&data, &spec, &opts(200, 2)).unwrap();
    for c in &boot.coefficients {
        assert!(c.ci.0 <= c.ci.1);
        assert!(c.se >= 0.0);
        assert_eq!(c.significant, c.ci.0 > 0.0 || c.ci.1 < 0.0);
    }
    assert!(boot.get(&path_xy()).unwrap().significant);
    assert_eq!(boot.succeeded(), 200);
}

#[test]
fn rejects_bad_options() {
    let (spec, data) = xy(100, 0.5, 1);
    assert!(matches!(
        bootstrap(&data, &spec, &opts(99, 0)),
        Err(BootstrapError::TooFewReplicates(99))
    ));
    let bad = BootstrapOptions {
        level: 1.0,
        ..opts(100, 0)
    };
    assert!(matches!(bootstrap(&data, &spec, &bad), Err(BootstrapError::InvalidLevel(_))));
}

#[test]
fn fragile_column_exceeds_failure_budget() {
    // one non-zero value in 12 rows: about a third of resamples lose it
    let n = 12;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let y: Vec<f64> = (0..n).map(|i| if i == 5 { 1.0 } else { 0.0 }).collect();
    let z = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n as f64;
        let s = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        v.iter().map(|a| (a - m) / s).collect::<Vec<_>>()
    };
    let mut cols = z(&x);
    cols.extend(z(&y));
    let data = PreparedData::from_standardized(
        vec!["x".into(), "y".into()],
        DMatrix::from_column_slice(n, 2, &cols),
        &[("X", &["x"]), ("Y", &["y"])],
    );
    let spec = parse_model(
        r#"{"blocks": [{"name": "X", "mode": "single-item", "indicators": ["x"]},
                       {"name": "Y", "mode": "single-item", "indicators": ["y"]}],
            "paths": [{"source": "X", "target": "Y"}]}"#,
    )
    .unwrap();
    match bootstrap(&data, &spec, &opts(100, 0)) {
        Err(BootstrapError::TooManyFailures {
            failed,
            attempted,
            diagnostics,
        }) => {
            assert!(failed > 5);
            assert_eq!(attempted, 100);
            assert!(!diagnostics.is_empty());
            assert!(diagnostics[0].contains("zero variance"));
        }
        other => panic!("expected failure budget error, got {other:?}"),
    }
}

#[test]
fn cyclic_coefficients_are_bootstrapped_jointly() {
    let pop = population(
        vec![single("A"), single("B"), single("C")],
        &common::TRIANGLE,
        400,
        6,
    );
    let spec = common::model_for(&pop, "reflective", Some(("C", &["A", "B"])));
    let data = prepared(&pop, &spec);
    let boot = bootstrap(
        &data,
        &spec,
        &BootstrapOptions {
            cyclic: Some(CyclicOptions::default()),
            ..opts(100, 4)
        },
    )
    .unwrap();
    for target in ["A", "B"] {
        let c = boot
            .get(&CoefficientId::Cyclic {
                source: "C".into(),
                target: target.into(),
            })
            .unwrap();
        assert!(c.se > 0.0);
        assert_eq!(c.replicates.len(), 100);
    }
}
