//! Bootstrap standard errors and percentile intervals for outer weights,
//! loadings, sequential paths and cyclic paths.
//!
//! Replicate `r` draws its row indices from a ChaCha8 stream keyed by
//! `(seed, r)`, so results do not depend on how replicates are scheduled.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclic::{estimate_cyclic_from, CyclicError, CyclicFit, CyclicOptions};
use crate::dataset::PreparedData;
use crate::modelspec::ModelSpec;
use crate::moments;
use crate::plscore::{fit_pls, fit_pls_from, FitError, FitOptions, PlsFit, Start};

pub const MIN_REPLICATES: usize = 100;
/// Share of failed replicates above which the bootstrap is abandoned.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("bootstrap needs at least {MIN_REPLICATES} replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("original-sample fit failed: {0}")]
    Fit(#[from] FitError),
    #[error("original-sample cyclic estimation failed: {0}")]
    Cyclic(#[from] CyclicError),
    #[error("{failed} of {attempted} bootstrap replicates failed (limit {:.0}%); first failures: {}", MAX_FAILURE_RATE * 100.0, .diagnostics.join("; "))]
    TooManyFailures {
        failed: usize,
        attempted: usize,
        diagnostics: Vec<String>,
    },
}

#[derive(Debug, Error, PartialEq)]
#[error("confidence level must lie strictly between 0 and 1, got {0}")]
pub struct LevelError(pub f64);

/// Identifies one bootstrapped coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientId {
    Weight { construct: String, indicator: String },
    Loading { construct: String, indicator: String },
    Path { source: String, target: String },
    Cyclic { source: String, target: String },
}

impl fmt::Display for CoefficientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientId::Weight {
                construct,
                indicator,
            } => write!(f, "weight {construct}/{indicator}"),
            CoefficientId::Loading {
                construct,
                indicator,
            } => write!(f, "loading {construct}/{indicator}"),
            CoefficientId::Path { source, target } => write!(f, "path {source} -> {target}"),
            CoefficientId::Cyclic { source, target } => write!(f, "cyclic {source} -> {target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSummary {
    pub id: CoefficientId,
    /// Original-sample estimate.
    pub estimate: f64,
    /// Successful replicate values, in replicate order.
    pub replicates: Vec<f64>,
    pub se: f64,
    pub ci: (f64, f64),
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub requested: usize,
    pub failed: usize,
    pub level: f64,
    pub seed: u64,
    pub coefficients: Vec<CoefficientSummary>,
}

impl BootstrapResult {
    pub fn get(&self, id: &CoefficientId) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| &c.id == id)
    }

    pub fn succeeded(&self) -> usize {
        self.requested - self.failed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub fit: FitOptions,
    /// When set and the model declares a cyclic section, both estimation
    /// steps are re-run per replicate.
    pub cyclic: Option<CyclicOptions>,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 500,
            level: 0.95,
            seed: 0,
            fit: FitOptions::default(),
            cyclic: None,
        }
    }
}

/// Nearest-rank percentile interval.
pub fn percentile_ci(replicates: &[f64], level: f64) -> Result<(f64, f64), LevelError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(LevelError(level));
    }
    assert!(!replicates.is_empty(), "percentile_ci: no replicates");
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = |q: f64| {
        // guard against q * n landing a hair above an integer
        let r = (q * n as f64 - 1e-9).ceil() as usize;
        r.clamp(1, n)
    };
    let tail = (1.0 - level) / 2.0;
    Ok((sorted[rank(tail) - 1], sorted[rank(1.0 - tail) - 1]))
}

/// Sample standard deviation (divisor B - 1); exactly zero when every
/// replicate is identical.
pub fn standard_error(replicates: &[f64]) -> f64 {
    if replicates.len() < 2 || replicates.iter().all(|&v| v == replicates[0]) {
        return 0.0;
    }
    let m = moments::mean(replicates);
    let ss = moments::exact_sum(replicates.iter().map(|v| (v - m) * (v - m)));
    (ss / (replicates.len() - 1) as f64).sqrt()
}

/// Row indices of replicate `r`.
pub fn resample_indices(seed: u64, replicate: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn coefficient_ids(fit: &PlsFit, cyclic: Option<&CyclicFit>) -> Vec<CoefficientId> {
    let mut ids = Vec::new();
    for (k, construct) in fit.constructs.iter().enumerate() {
        for indicator in &fit.indicators[k] {
            ids.push(CoefficientId::Weight {
                construct: construct.clone(),
                indicator: indicator.clone(),
            });
        }
    }
    for (k, construct) in fit.constructs.iter().enumerate() {
        for indicator in &fit.indicators[k] {
            ids.push(CoefficientId::Loading {
                construct: construct.clone(),
                indicator: indicator.clone(),
            });
        }
    }
    for &(s, t) in &fit.edges {
        ids.push(CoefficientId::Path {
            source: fit.constructs[s].clone(),
            target: fit.constructs[t].clone(),
        });
    }
    if let Some(c) = cyclic {
        for p in &c.paths {
            ids.push(CoefficientId::Cyclic {
                source: p.source.clone(),
                target: p.target.clone(),
            });
        }
    }
    ids
}

fn coefficient_values(fit: &PlsFit, cyclic: Option<&CyclicFit>) -> Vec<f64> {
    let mut values: Vec<f64> = fit.weights.0.iter().flat_map(|w| w.iter().copied()).collect();
    values.extend(fit.loadings.iter().flatten().copied());
    values.extend(fit.edges.iter().map(|&(s, t)| fit.paths[(s, t)]));
    if let Some(c) = cyclic {
        values.extend(c.paths.iter().map(|p| p.beta_ce));
    }
    values
}

#[derive(Debug)]
enum ReplicateFailure {
    Data(String),
    Fit(FitError),
    Cyclic(CyclicError),
    NotConverged,
}

impl fmt::Display for ReplicateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplicateFailure::Data(e) => f.write_str(e),
            ReplicateFailure::Fit(e) => write!(f, "{e}"),
            ReplicateFailure::Cyclic(e) => write!(f, "{e}"),
            ReplicateFailure::NotConverged => f.write_str("outer weights did not converge"),
        }
    }
}

pub fn bootstrap(
    data: &PreparedData,
    spec: &ModelSpec,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult, BootstrapError> {
    let original = fit_pls(data, spec, opts.fit)?;
    let original_cyclic = match (opts.cyclic, &spec.cyclic) {
        (Some(copts), Some(_)) => Some(estimate_cyclic_from(data, &original, spec, copts, None)?),
        _ => None,
    };
    bootstrap_around(data, spec, opts, &original, original_cyclic.as_ref())
}

/// Bootstrap given already computed original-sample estimates (which are
/// left untouched).
pub fn bootstrap_around(
    data: &PreparedData,
    spec: &ModelSpec,
    opts: &BootstrapOptions,
    original: &PlsFit,
    original_cyclic: Option<&CyclicFit>,
) -> Result<BootstrapResult, BootstrapError> {
    if opts.replicates < MIN_REPLICATES {
        return Err(BootstrapError::TooFewReplicates(opts.replicates));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(BootstrapError::InvalidLevel(opts.level));
    }
    let n = data.n_rows();

    let run = |r: usize| -> Result<Vec<f64>, ReplicateFailure> {
        let rows = resample_indices(opts.seed, r, n);
        let sample = data
            .resample(&rows)
            .map_err(|e| ReplicateFailure::Data(e.to_string()))?;
        let start = Start {
            init: None,
            orient_to: Some(&original.weights),
        };
        let fit = fit_pls_from(&sample, spec, opts.fit, start).map_err(ReplicateFailure::Fit)?;
        if !fit.converged {
            return Err(ReplicateFailure::NotConverged);
        }
        let cyclic = match (opts.cyclic, original_cyclic) {
            (Some(copts), Some(orig)) => Some(
                estimate_cyclic_from(&sample, &fit, spec, copts, Some(&orig.step2.weights))
                    .map_err(ReplicateFailure::Cyclic)?,
            ),
            _ => None,
        };
        Ok(coefficient_values(&fit, cyclic.as_ref()))
    };

    let outcomes: Vec<Result<Vec<f64>, ReplicateFailure>> =
        (0..opts.replicates).into_par_iter().map(run).collect();

    let failures: Vec<String> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().err().map(|e| format!("replicate {r}: {e}")))
        .collect();
    if failures.len() as f64 > MAX_FAILURE_RATE * opts.replicates as f64 {
        return Err(BootstrapError::TooManyFailures {
            failed: failures.len(),
            attempted: opts.replicates,
            diagnostics: failures.into_iter().take(3).collect(),
        });
    }

    let ids = coefficient_ids(original, original_cyclic);
    let estimates = coefficient_values(original, original_cyclic);
    let good: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let coefficients = ids
        .into_iter()
        .zip(estimates)
        .enumerate()
        .map(|(c, (id, estimate))| {
            let replicates: Vec<f64> = good.iter().map(|v| v[c]).collect();
            let ci = percentile_ci(&replicates, opts.level).expect("level checked above");
            CoefficientSummary {
                id,
                estimate,
                se: standard_error(&replicates),
                significant: ci.0 > 0.0 || ci.1 < 0.0,
                ci,
                replicates,
            }
        })
        .collect();

    Ok(BootstrapResult {
        requested: opts.replicates,
        failed: failures.len(),
        level: opts.level,
        seed: opts.seed,
        coefficients,
    })
}
