mod common;

use common::{column, naive_corr, population, prepared, reflective, single};
use cyclic_pls::cyclic::{
    build_feedback_model, estimate_cyclic, score_column_name, CyclicError, CyclicOptions, Step2Inner,
};
use cyclic_pls::dataset::{prepare_blocks, MissingPolicy};
use cyclic_pls::modelspec::{Mode, PathSpec};
use cyclic_pls::plscore::{fit_pls, FitOptions};
use cyclic_pls::simgen::{gen_acyclic, ConstructSpec, Measurement};

fn binary(name: &str, loadings: &[f64]) -> ConstructSpec {
    ConstructSpec {
        name: name.into(),
        measurement: Measurement::Binary {
            loadings: loadings.to_vec(),
            thresholds: Some(vec![0.0, 0.4, -0.3, 0.2][..loadings.len()].to_vec()),
        },
    }
}

fn internet_population(n: usize, seed: u64) -> cyclic_pls::simgen::PopulationSpec {
    population(
        vec![
            binary("PA", &[0.7, 0.6, 0.65, 0.6]),
            reflective("DS", &[0.75, 0.7, 0.85, 0.77]),
            reflective("IU", &[0.73, 0.69, 0.72, 0.74]),
        ],
        &[("PA", "DS", 0.45), ("PA", "IU", 0.25), ("DS", "IU", 0.6)],
        n,
        seed,
    )
}

fn internet_model(pop: &cyclic_pls::simgen::PopulationSpec) -> cyclic_pls::modelspec::ModelSpec {
    let mut spec = common::model_for(pop, "reflective", Some(("IU", &["PA", "DS"])));
    spec.blocks[0].mode = Mode::McaSingleItem;
    spec
}

#[test]
fn feedback_model_has_only_source_to_target_edges() {
    let pop = internet_population(600, 2);
    let spec = internet_model(&pop);
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let step2 = build_feedback_model(&fit, &spec, Step2Inner::FeedbackOnly).unwrap();
    let names: Vec<&str> = step2.blocks.iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, ["IU", "PA", "DS"]);
    assert_eq!(step2.blocks[0].mode, Mode::SingleItem);
    assert_eq!(step2.blocks[0].indicators, [score_column_name("IU")]);
    assert_eq!(step2.blocks[1], spec.blocks[0]);
    assert_eq!(step2.blocks[2], spec.blocks[1]);
    assert_eq!(step2.paths, [PathSpec::new("IU", "PA"), PathSpec::new("IU", "DS")]);
    assert!(step2.cyclic.is_none());

    let controls = build_feedback_model(&fit, &spec, Step2Inner::WithTargetControls).unwrap();
    assert!(controls.paths.contains(&PathSpec::new("PA", "DS")));
    assert_eq!(controls.paths.len(), 3);
}

#[test]
fn single_target_gives_one_path() {
    let pop = population(vec![single("A"), single("B"), single("C")], &common::TRIANGLE, 300, 3);
    let spec = common::model_for(&pop, "reflective", Some(("C", &["B"])));
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let cyc = estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()).unwrap();
    assert_eq!(cyc.step2_spec.paths.len(), 1);
    assert_eq!(cyc.paths.len(), 1);
}

#[test]
fn single_item_target_reduces_to_a_correlation() {
    let pop = population(
        vec![single("A"), reflective("B", &[0.8, 0.7, 0.75]), reflective("C", &[0.8, 0.8, 0.7])],
        &common::TRIANGLE,
        2000,
        10,
    );
    let spec = common::model_for(&pop, "reflective", Some(("C", &["A", "B"])));
    let (raw, _) = gen_acyclic(&pop).unwrap();
    let data = prepare_blocks(&raw, &spec, MissingPolicy::Listwise).unwrap();
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let cyc = estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()).unwrap();
    let a = cyc.paths.iter().find(|p| p.target == "A").unwrap();
    let expected = naive_corr(&fit.score("C").unwrap(), &column(&raw, "A"));
    assert!((a.beta_ce - expected).abs() < 1e-10);
}

#[test]
fn cyclic_effect_is_score_correlation_and_pairs_with_mirror() {
    let pop = internet_population(3000, 21);
    let spec = internet_model(&pop);
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let before = fit.clone();
    let cyc = estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()).unwrap();
    assert_eq!(fit, before, "step 1 must not change");
    let source = fit.score("IU").unwrap();
    for p in &cyc.paths {
        let target = cyc.step2.score(&p.target).unwrap();
        assert!((p.beta_ce - naive_corr(&source, &target)).abs() < 1e-10);
        assert!(p.beta_ce.abs() <= 1.0);
        assert_eq!(p.beta_se, fit.path(&p.target, "IU"));
        assert!(p.diagnostic.is_none());
    }
}

#[test]
fn indirect_only_pair_is_reported_not_tested() {
    // A -> B -> C with no direct A -> C edge
    let pop = population(
        vec![single("A"), single("B"), single("C")],
        &[("A", "B", 0.5), ("B", "C", 0.6)],
        300,
        4,
    );
    let spec = common::model_for(&pop, "reflective", Some(("C", &["A", "B"])));
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let cyc = estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()).unwrap();
    let a = cyc.paths.iter().find(|p| p.target == "A").unwrap();
    assert!(a.beta_se.is_none());
    assert!(a.diagnostic.as_deref().unwrap().contains("no direct sequential path"));
    let b = cyc.paths.iter().find(|p| p.target == "B").unwrap();
    assert!(b.beta_se.is_some());
}

#[test]
fn guards_run_before_estimation() {
    let pop = population(vec![single("X"), single("Y")], &[("X", "Y", 0.5)], 100, 1);
    let spec = common::model_for(&pop, "reflective", Some(("Y", &["X"])));
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    match estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()) {
        Err(CyclicError::Invalid(report)) => {
            assert!(report.to_string().contains("same correlation coefficient"));
        }
        other => panic!("expected guard, got {other:?}"),
    }
    let plain = common::model_for(&pop, "reflective", None);
    assert!(matches!(
        estimate_cyclic(&data, &fit, &plain, CyclicOptions::default()),
        Err(CyclicError::NoCyclicSpec)
    ));
}

#[test]
fn acyclic_population_inflates_feedback_towards_correlation() {
    // true feedback is zero; the cyclic estimate tracks corr(A, C) = 0.5
    let pop = population(vec![single("A"), single("B"), single("C")], &common::TRIANGLE, 20_000, 55);
    let spec = common::model_for(&pop, "reflective", Some(("C", &["A", "B"])));
    let data = prepared(&pop, &spec);
    let fit = fit_pls(&data, &spec, FitOptions::default()).unwrap();
    let cyc = estimate_cyclic(&data, &fit, &spec, CyclicOptions::default()).unwrap();
    let a = cyc.paths.iter().find(|p| p.target == "A").unwrap();
    let b = cyc.paths.iter().find(|p| p.target == "B").unwrap();
    assert!((a.beta_ce - 0.5).abs() < 0.03);
    assert!((b.beta_ce - 0.7).abs() < 0.03);
    // both exceed their sequential mirrors
    assert!(a.beta_ce > a.beta_se.unwrap());
    assert!(b.beta_ce > b.beta_se.unwrap());
}
