//! Reliability and validity indices for the measurement model, with the
//! usual threshold checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PreparedData;
use crate::modelspec::Mode;
use crate::moments;
use crate::plscore::PlsFit;
use crate::resample::BootstrapResult;

pub const ALPHA_MIN: f64 = 0.7;
pub const CR_MIN: f64 = 0.7;
pub const RHO_A_MIN: f64 = 0.7;
pub const AVE_MIN: f64 = 0.5;
pub const LOADING_MIN: f64 = 0.7;
/// Values at most this far below a threshold are flagged borderline.
pub const BORDERLINE_BAND: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("at least {needed} items required, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("weights have no off-diagonal structure; rho_A is undefined")]
    ZeroDenominator,
}

/// Standardized-item Cronbach's alpha from a block correlation matrix.
pub fn cronbach_alpha_from_corr(corr: &DMatrix<f64>) -> Result<f64, IndexError> {
    let p = corr.nrows();
    if p < 2 {
        return Err(IndexError::TooFewItems { needed: 2, got: p });
    }
    let p = p as f64;
    Ok(p / (p - 1.0) * (1.0 - p / corr.sum()))
}

pub fn cronbach_alpha(block: &DMatrix<f64>) -> Result<f64, IndexError> {
    cronbach_alpha_from_corr(&moments::correlation_matrix(block))
}

/// Composite reliability (Dillon-Goldstein's rho).
pub fn composite_reliability(loadings: &[f64]) -> Result<f64, IndexError> {
    if loadings.is_empty() {
        return Err(IndexError::TooFewItems { needed: 1, got: 0 });
    }
    let sum: f64 = loadings.iter().sum();
    let error: f64 = loadings.iter().map(|l| 1.0 - l * l).sum();
    Ok(sum * sum / (sum * sum + error))
}

/// Average variance extracted.
pub fn ave(loadings: &[f64]) -> Result<f64, IndexError> {
    if loadings.is_empty() {
        return Err(IndexError::TooFewItems { needed: 1, got: 0 });
    }
    Ok(loadings.iter().map(|l| l * l).sum::<f64>() / loadings.len() as f64)
}

/// Dijkstra-Henseler rho_A for unit-variance outer weights.
pub fn dijkstra_rho_a(weights: &DVector<f64>, corr: &DMatrix<f64>) -> Result<f64, IndexError> {
    let p = weights.len();
    if p < 2 {
        return Err(IndexError::TooFewItems { needed: 2, got: p });
    }
    let ww = weights * weights.transpose();
    let off = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        m.fill_diagonal(0.0);
        m
    };
    let numerator = weights.dot(&(off(corr) * weights));
    let denominator = weights.dot(&(off(&ww) * weights));
    if denominator.abs() < 1e-300 {
        return Err(IndexError::ZeroDenominator);
    }
    let wtw = weights.dot(weights);
    Ok(wtw * wtw * numerator / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unidimensionality {
    pub eig1: f64,
    pub eig2: f64,
    pub pass: bool,
}

pub fn unidimensionality_from_corr(corr: &DMatrix<f64>) -> Result<Unidimensionality, IndexError> {
    let p = corr.nrows();
    if p < 2 {
        return Err(IndexError::TooFewItems { needed: 2, got: p });
    }
    let mut eig: Vec<f64> = corr.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(Unidimensionality {
        eig1: eig[0],
        eig2: eig[1],
        pass: eig[0] > 1.0 && eig[1] < 1.0,
    })
}

pub fn unidimensionality(block: &DMatrix<f64>) -> Result<Unidimensionality, IndexError> {
    unidimensionality_from_corr(&moments::correlation_matrix(block))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    Pass,
    Borderline,
    Fail,
    Exempt,
    NotApplicable,
}

impl Flag {
    /// Pass iff `value > threshold`; borderline within the band below.
    pub fn above(value: f64, threshold: f64) -> Self {
        if value > threshold {
            Flag::Pass
        } else if value >= threshold - BORDERLINE_BAND {
            Flag::Borderline
        } else {
            Flag::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Borderline => "borderline",
            Flag::Fail => "fail",
            Flag::Exempt => "exempt",
            Flag::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorAssessment {
    pub name: String,
    pub loading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructFlags {
    pub alpha: Flag,
    pub composite_reliability: Flag,
    pub rho_a: Flag,
    pub ave: Flag,
    pub unidimensionality: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructAssessment {
    pub construct: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite_reliability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ave: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig2: Option<f64>,
    pub indicators: Vec<IndicatorAssessment>,
    pub flags: ConstructFlags,
}

/// Index values for one construct, as fed to [`flag_construct`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndexValues {
    pub alpha: Option<f64>,
    pub composite_reliability: Option<f64>,
    pub rho_a: Option<f64>,
    pub ave: Option<f64>,
    pub eigenvalues: Option<(f64, f64)>,
    pub loadings: Vec<f64>,
}

/// Threshold flags as a pure function of the index values.
pub fn flag_construct(mode: Mode, v: &IndexValues) -> (ConstructFlags, Vec<Flag>) {
    if mode.is_single_column() {
        let all = ConstructFlags {
            alpha: Flag::Exempt,
            composite_reliability: Flag::Exempt,
            rho_a: Flag::Exempt,
            ave: Flag::Exempt,
            unidimensionality: Flag::Exempt,
        };
        return (all, vec![Flag::Exempt; v.loadings.len()]);
    }
    let opt = |x: Option<f64>, t: f64| x.map_or(Flag::NotApplicable, |x| Flag::above(x, t));
    let flags = ConstructFlags {
        alpha: opt(v.alpha, ALPHA_MIN),
        composite_reliability: opt(v.composite_reliability, CR_MIN),
        rho_a: opt(v.rho_a, RHO_A_MIN),
        ave: opt(v.ave, AVE_MIN),
        unidimensionality: match v.eigenvalues {
            Some((e1, e2)) if e1 > 1.0 && e2 < 1.0 => Flag::Pass,
            Some(_) => Flag::Fail,
            None => Flag::NotApplicable,
        },
    };
    let loading_flags = if mode == Mode::Reflective {
        v.loadings.iter().map(|&l| Flag::above(l, LOADING_MIN)).collect()
    } else {
        vec![Flag::NotApplicable; v.loadings.len()]
    };
    (flags, loading_flags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub constructs: Vec<ConstructAssessment>,
}

/// Full battery over a converged fit. Loading intervals are attached when a
/// bootstrap result is supplied.
pub fn assess(fit: &PlsFit, data: &PreparedData, boot: Option<&BootstrapResult>) -> ReliabilityReport {
    let constructs = fit
        .constructs
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mode = fit.modes[k];
            let corr = &data
                .block_matrix(name)
                .map(|m| moments::correlation_matrix(&m))
                .unwrap_or_else(|| DMatrix::identity(1, 1));
            let loadings = fit.loadings[k].clone();
            let multi = !mode.is_single_column() && corr.nrows() >= 2;
            let values = IndexValues {
                alpha: multi.then(|| cronbach_alpha_from_corr(corr).ok()).flatten(),
                composite_reliability: multi
                    .then(|| composite_reliability(&loadings).ok())
                    .flatten(),
                rho_a: (multi && mode == Mode::Reflective)
                    .then(|| dijkstra_rho_a(fit.weights.block(k), corr).ok())
                    .flatten(),
                ave: multi.then(|| ave(&loadings).ok()).flatten(),
                eigenvalues: multi
                    .then(|| unidimensionality_from_corr(corr).ok())
                    .flatten()
                    .map(|u| (u.eig1, u.eig2)),
                loadings: loadings.clone(),
            };
            let (flags, loading_flags) = flag_construct(mode, &values);
            let indicators = fit.indicators[k]
                .iter()
                .zip(&loadings)
                .zip(loading_flags)
                .map(|((ind, &l), flag)| {
                    let summary = boot.and_then(|b| b.get(&crate::resample::CoefficientId::Loading {
                        construct: name.clone(),
                        indicator: ind.clone(),
                    }));
                    IndicatorAssessment {
                        name: ind.clone(),
                        loading: l,
                        ci_lower: summary.map(|s| s.ci.0),
                        ci_upper: summary.map(|s| s.ci.1),
                        significant: summary.map(|s| s.significant),
                        flag,
                    }
                })
                .collect();
            ConstructAssessment {
                construct: name.clone(),
                mode,
                alpha: values.alpha,
                composite_reliability: values.composite_reliability,
                rho_a: values.rho_a,
                ave: values.ave,
                eig1: values.eigenvalues.map(|e| e.0),
                eig2: values.eigenvalues.map(|e| e.1),
                indicators,
                flags,
            }
        })
        .collect();
    ReliabilityReport { constructs }
}
