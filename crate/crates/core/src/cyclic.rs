//! Two-step estimation of cyclic feedback effects from cross-sectional data.
//!
//! Step 1 is an ordinary sequential fit. Step 2 fits a separate model in which
//! the step-1 score of the dependent construct is a single-item predictor of
//! its antecedents, whose blocks keep their own indicators and get fresh
//! outer weights. Each feedback coefficient (CE) is then compared with its
//! mirror sequential coefficient (SE) using bootstrap standard errors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::dataset::{DataError, PreparedData};
use crate::modelspec::{validate_model, BlockSpec, Mode, ModelSpec, PathSpec, ValidationReport};
use crate::plscore::{fit_pls_from, FitError, FitOptions, OuterWeights, PlsFit, Start};

/// Significance level of the reinforcement decision.
pub const TEST_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CyclicError {
    #[error("no cyclic specification in the model")]
    NoCyclicSpec,
    #[error("model cannot be estimated cyclically: {0}")]
    Invalid(ValidationReport),
    #[error("step-1 score of `{0}` is missing from the fit")]
    MissingScore(String),
    #[error("step-2 data: {0}")]
    Data(#[from] DataError),
    #[error("step-2 estimation: {0}")]
    Fit(#[from] FitError),
    #[error("step-2 outer weights did not converge after {0} iterations")]
    NotConverged(usize),
}

/// Inner model of the step-2 fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step2Inner {
    /// Only the feedback edges source -> target.
    #[default]
    FeedbackOnly,
    /// Feedback edges plus the step-1 paths among the targets.
    WithTargetControls,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CyclicOptions {
    pub fit: FitOptions,
    pub inner: Step2Inner,
}

pub fn score_column_name(source: &str) -> String {
    format!("{source}.score")
}

/// Derive the step-2 model: the cyclic source becomes a single-item block
/// measured by its step-1 score, every target keeps its block and mode, and
/// the inner model holds the feedback edges (plus target-to-target paths
/// when requested).
pub fn build_feedback_model(fit: &PlsFit, spec: &ModelSpec, inner: Step2Inner) -> Result<ModelSpec, CyclicError> {
    let cyclic = spec.cyclic.as_ref().ok_or(CyclicError::NoCyclicSpec)?;
    if fit.index_of(&cyclic.source).is_none() {
        return Err(CyclicError::MissingScore(cyclic.source.clone()));
    }
    let mut blocks = vec![BlockSpec {
        name: cyclic.source.clone(),
        mode: Mode::SingleItem,
        indicators: vec![score_column_name(&cyclic.source)],
    }];
    blocks.extend(
        spec.blocks
            .iter()
            .filter(|b| cyclic.targets.contains(&b.name))
            .cloned(),
    );
    let mut paths: Vec<PathSpec> = blocks[1..]
        .iter()
        .map(|b| PathSpec::new(cyclic.source.clone(), b.name.clone()))
        .collect();
    if inner == Step2Inner::WithTargetControls {
        paths.extend(
            spec.paths
                .iter()
                .filter(|p| cyclic.targets.contains(&p.source) && cyclic.targets.contains(&p.target))
                .cloned(),
        );
    }
    Ok(ModelSpec {
        blocks,
        paths,
        cyclic: None,
        scheme: spec.scheme,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicPath {
    pub source: String,
    pub target: String,
    /// Step-2 coefficient of the source score on the target.
    pub beta_ce: f64,
    /// Step-1 direct path target -> source, when declared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicFit {
    pub step2_spec: ModelSpec,
    pub step2: PlsFit,
    pub paths: Vec<CyclicPath>,
}

/// Structural pre-check shared by the CLI and the estimator.
pub fn check_cyclic_model(spec: &ModelSpec) -> Result<(), CyclicError> {
    if spec.cyclic.is_none() {
        return Err(CyclicError::NoCyclicSpec);
    }
    // column checks are the data layer's job; only graph structure here
    let columns: Vec<&str> = spec
        .blocks
        .iter()
        .flat_map(|b| b.indicators.iter().map(String::as_str))
        .collect();
    let report = validate_model(spec, &columns);
    if report.is_empty() {
        Ok(())
    } else {
        Err(CyclicError::Invalid(report))
    }
}

pub fn estimate_cyclic(
    data: &PreparedData,
    fit: &PlsFit,
    spec: &ModelSpec,
    opts: CyclicOptions,
) -> Result<CyclicFit, CyclicError> {
    estimate_cyclic_from(data, fit, spec, opts, None)
}

/// As [`estimate_cyclic`], optionally orienting the step-2 blocks towards
/// reference weights (bootstrap sign alignment).
pub fn estimate_cyclic_from(
    data: &PreparedData,
    fit: &PlsFit,
    spec: &ModelSpec,
    opts: CyclicOptions,
    orient_to: Option<&OuterWeights>,
) -> Result<CyclicFit, CyclicError> {
    check_cyclic_model(spec)?;
    let cyclic = spec.cyclic.as_ref().expect("checked above");
    let step2_spec = build_feedback_model(fit, spec, opts.inner)?;
    let score = fit
        .score(&cyclic.source)
        .ok_or_else(|| CyclicError::MissingScore(cyclic.source.clone()))?;
    let step2_data =
        data.with_single_column_block(&cyclic.source, &score_column_name(&cyclic.source), &score)?;
    let step2 = fit_pls_from(
        &step2_data,
        &step2_spec,
        opts.fit,
        Start {
            init: None,
            orient_to,
        },
    )?;
    if !step2.converged {
        return Err(CyclicError::NotConverged(step2.iterations));
    }

    let paths = step2_spec.blocks[1..]
        .iter()
        .map(|target| {
            let beta_ce = step2
                .path(&cyclic.source, &target.name)
                .expect("feedback edge present in step-2 model");
            let beta_se = fit.path(&target.name, &cyclic.source);
            let diagnostic = beta_se.is_none().then(|| {
                format!(
                    "no direct sequential path `{}` -> `{}`; reinforcement test skipped",
                    target.name, cyclic.source
                )
            });
            CyclicPath {
                source: cyclic.source.clone(),
                target: target.name.clone(),
                beta_ce,
                beta_se,
                diagnostic,
            }
        })
        .collect();

    Ok(CyclicFit {
        step2_spec,
        step2,
        paths,
    })
}

/// Alternative hypothesis of the reinforcement test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The cyclic effect exceeds the sequential one.
    #[default]
    CeGtSe,
    SeGtCe,
    TwoSided,
}

#[derive(Debug, Error, PartialEq)]
pub enum TestError {
    #[error("standard errors must be positive (got {sigma_se}, {sigma_ce})")]
    NonPositiveSigma { sigma_se: f64, sigma_ce: f64 },
    #[error("sample size must be at least 2, got {0}")]
    SampleTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t: f64,
    pub df: u64,
    pub p_value: f64,
    pub direction: Direction,
    /// Null rejected at [`TEST_ALPHA`].
    pub reject: bool,
}

/// Pooled-variance term `((n-1)/n) (sigma_se² + sigma_ce²)`.
fn pooled_variance(sigma_se: f64, sigma_ce: f64, n: usize) -> f64 {
    let n = n as f64;
    (n - 1.0) / n * (sigma_se * sigma_se + sigma_ce * sigma_ce)
}

/// Satterthwaite-style degrees of freedom, truncated to an integer.
pub fn reinforcement_df(sigma_se: f64, sigma_ce: f64, n: usize) -> u64 {
    // ((n-1)/n · S2)² / ((n-1)/n² · S4) reduces to (n-1) · S2² / S4; the
    // reduced form keeps the equal-sigma case exact at 2(n-1).
    let v1 = sigma_se * sigma_se;
    let v2 = sigma_ce * sigma_ce;
    let ratio = (v1 + v2) * (v1 + v2) / (v1 * v1 + v2 * v2);
    ((n - 1) as f64 * ratio).floor().max(1.0) as u64
}

pub fn reinforcement_test(
    beta_se: f64,
    beta_ce: f64,
    sigma_se: f64,
    sigma_ce: f64,
    n: usize,
    direction: Direction,
) -> Result<TestResult, TestError> {
    if !(sigma_se > 0.0 && sigma_ce > 0.0) {
        return Err(TestError::NonPositiveSigma { sigma_se, sigma_ce });
    }
    if n < 2 {
        return Err(TestError::SampleTooSmall(n));
    }
    let t = (beta_se - beta_ce).abs() / pooled_variance(sigma_se, sigma_ce, n).sqrt();
    let df = reinforcement_df(sigma_se, sigma_ce, n);
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p_value = match direction {
        Direction::CeGtSe => dist.sf(if beta_ce >= beta_se { t } else { -t }),
        Direction::SeGtCe => dist.sf(if beta_se >= beta_ce { t } else { -t }),
        Direction::TwoSided => (2.0 * dist.sf(t)).min(1.0),
    };
    Ok(TestResult {
        t,
        df,
        p_value,
        direction,
        reject: p_value < TEST_ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_coefficients_give_zero_t() {
        let r = reinforcement_test(0.4, 0.4, 0.01, 0.02, 100, Direction::CeGtSe).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_value - 0.5).abs() < 1e-12);
        assert!(!r.reject);
    }

    #[test]
    fn equal_sigma_df_is_twice_n_minus_one() {
        for &n in &[2usize, 3, 10, 151_660, 1_000_003] {
            for &s in &[1e-6, 0.0010666, 0.001656, 0.013, 0.5, 3.0] {
                assert_eq!(reinforcement_df(s, s, n), 2 * (n as u64 - 1), "n={n} s={s}");
            }
        }
    }

    #[test]
    fn df_matches_literal_formula() {
        let (s1, s2, n) = (0.02f64, 0.035f64, 400usize);
        let nf = n as f64;
        let num = ((nf - 1.0) / nf * (s1.powi(2) + s2.powi(2))).powi(2);
        let den = (nf - 1.0) / nf.powi(2) * (s1.powi(4) + s2.powi(4));
        assert_eq!(reinforcement_df(s1, s2, n), (num / den).floor() as u64);
    }

    #[test]
    fn symmetric_in_coefficient_slots() {
        let a = reinforcement_test(0.3, 0.5, 0.02, 0.03, 500, Direction::TwoSided).unwrap();
        let b = reinforcement_test(0.5, 0.3, 0.03, 0.02, 500, Direction::TwoSided).unwrap();
        assert!((a.t - b.t).abs() < 1e-12);
        assert_eq!(a.df, b.df);
        let c = reinforcement_test(0.5, 0.3, 0.03, 0.02, 500, Direction::CeGtSe).unwrap();
        let d = reinforcement_test(0.3, 0.5, 0.02, 0.03, 500, Direction::CeGtSe).unwrap();
        assert!(c.p_value > 0.5 && d.p_value < 0.5);
    }

    #[test]
    fn sigma_scaling() {
        let a = reinforcement_test(0.3, 0.5, 0.02, 0.03, 500, Direction::CeGtSe).unwrap();
        let b = reinforcement_test(0.3, 0.5, 0.04, 0.06, 500, Direction::CeGtSe).unwrap();
        assert!((a.t - 2.0 * b.t).abs() < 1e-12);
        assert_eq!(a.df, b.df);
    }

    #[test]
    fn two_sided_doubles_one_sided() {
        let one = reinforcement_test(0.30, 0.33, 0.02, 0.02, 200, Direction::CeGtSe).unwrap();
        let two = reinforcement_test(0.30, 0.33, 0.02, 0.02, 200, Direction::TwoSided).unwrap();
        assert!((two.p_value - 2.0 * one.p_value).abs() < 1e-14);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            reinforcement_test(0.1, 0.2, 0.0, 0.1, 10, Direction::CeGtSe),
            Err(TestError::NonPositiveSigma { .. })
        ));
        assert_eq!(
            reinforcement_test(0.1, 0.2, 0.1, 0.1, 1, Direction::CeGtSe),
            Err(TestError::SampleTooSmall(1))
        );
    }

    #[test]
    fn large_df_close_to_normal() {
        use statrs::distribution::Normal;
        let r = reinforcement_test(0.50, 0.52, 0.01, 0.01, 5000, Direction::CeGtSe).unwrap();
        let z = Normal::new(0.0, 1.0).unwrap();
        assert!(r.df > 1000);
        // t-tail and normal-tail differ by O(1/df) at this t
        assert!((r.p_value - z.sf(r.t)).abs() < 1e-4);
    }
}
