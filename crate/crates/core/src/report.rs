//! End-to-end runs (prepare, fit, assess, bootstrap, cyclic step) and the
//! report they produce, in JSON and as aligned text tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{assess, ReliabilityReport};
use crate::cyclic::{
    check_cyclic_model, estimate_cyclic, reinforcement_test, CyclicError, CyclicFit, CyclicOptions, Direction,
    Step2Inner, TestError,
};
use crate::dataset::{prepare_blocks, DataError, McaSummary, MissingPolicy, PreparedData, RawTable};
use crate::modelspec::{validate_model, Mode, ModelError, ModelSpec, Scheme};
use crate::plscore::{fit_pls, FitError, FitOptions, PlsFit};
use crate::resample::{bootstrap_around, BootstrapError, BootstrapOptions, BootstrapResult, CoefficientId};
use crate::simgen::SimError;

pub const TOOL_NAME: &str = "cyclic-pls";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Estimation,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Estimation => 3,
            ErrorClass::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct RunError {
    pub class: ErrorClass,
    pub message: String,
}

impl RunError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Validation,
            message: message.into(),
        }
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Estimation,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => Self::io(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<DataError> for RunError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => Self::io(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<FitError> for RunError {
    fn from(e: FitError) -> Self {
        Self::estimation(e.to_string())
    }
}

impl From<BootstrapError> for RunError {
    fn from(e: BootstrapError) -> Self {
        match e {
            BootstrapError::TooFewReplicates(_) | BootstrapError::InvalidLevel(_) => {
                Self::validation(e.to_string())
            }
            _ => Self::estimation(format!("bootstrap: {e}")),
        }
    }
}

impl From<CyclicError> for RunError {
    fn from(e: CyclicError) -> Self {
        match e {
            CyclicError::NoCyclicSpec | CyclicError::Invalid(_) => Self::validation(e.to_string()),
            _ => Self::estimation(e.to_string()),
        }
    }
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(_) | SimError::Csv(_) => Self::io(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Overrides the model's inner weighting scheme when set.
    pub scheme: Option<Scheme>,
    pub fit: FitOptions,
    pub missing: MissingPolicy,
    /// Bootstrap replicates; 0 disables resampling.
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
    pub direction: Direction,
    pub step2_inner: Step2Inner,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: None,
            fit: FitOptions::default(),
            missing: MissingPolicy::default(),
            bootstrap: 500,
            level: 0.95,
            seed: 0,
            direction: Direction::default(),
            step2_inner: Step2Inner::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iter: usize,
    pub missing: MissingPolicy,
    pub bootstrap: usize,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step2_inner: Option<Step2Inner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCount {
    pub construct: String,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_total: usize,
    pub n_effective: usize,
    pub missing: Vec<MissingCount>,
}

/// Bootstrap summary of one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterEstimate {
    pub indicator: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_interval: Option<Interval>,
    pub loading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading_interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructFit {
    pub construct: String,
    pub mode: Mode,
    pub indicators: Vec<OuterEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub source: String,
    pub target: String,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub iterations: usize,
    pub converged: bool,
    pub constructs: Vec<ConstructFit>,
    pub paths: Vec<PathEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub failed: usize,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Reject,
    Retain,
}

/// One row of the sequential-versus-cyclic comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicPair {
    pub source: String,
    pub target: String,
    pub beta_ce: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ce_interval: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_diff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_ce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicSection {
    pub direction: Direction,
    pub step2_inner: Step2Inner,
    /// Sample size entering the test statistic.
    pub n: usize,
    pub step2: FitSection,
    pub pairs: Vec<CyclicPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub settings: Settings,
    pub model: ModelSpec,
    pub data: DataSummary,
    pub fit: FitSection,
    pub assessment: ReliabilityReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic: Option<CyclicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mca: Option<Vec<McaSummary>>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(document: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(document)
    }
}

fn interval(boot: Option<&BootstrapResult>, id: CoefficientId) -> Option<Interval> {
    let c = boot?.get(&id)?;
    Some(Interval {
        se: c.se,
        ci_lower: c.ci.0,
        ci_upper: c.ci.1,
        significant: c.significant,
    })
}

fn fit_section(fit: &PlsFit, boot: Option<&BootstrapResult>) -> FitSection {
    let constructs = fit
        .constructs
        .iter()
        .enumerate()
        .map(|(k, name)| ConstructFit {
            construct: name.clone(),
            mode: fit.modes[k],
            indicators: fit.indicators[k]
                .iter()
                .enumerate()
                .map(|(j, ind)| {
                    let key = |weight: bool| {
                        let (construct, indicator) = (name.clone(), ind.clone());
                        if weight {
                            CoefficientId::Weight { construct, indicator }
                        } else {
                            CoefficientId::Loading { construct, indicator }
                        }
                    };
                    OuterEstimate {
                        indicator: ind.clone(),
                        weight: fit.weights.block(k)[j],
                        weight_interval: interval(boot, key(true)),
                        loading: fit.loadings[k][j],
                        loading_interval: interval(boot, key(false)),
                    }
                })
                .collect(),
            r_squared: fit.r_squared[k],
        })
        .collect();
    let paths = fit
        .edges
        .iter()
        .map(|&(s, t)| {
            let (source, target) = (fit.constructs[s].clone(), fit.constructs[t].clone());
            PathEstimate {
                estimate: fit.paths[(s, t)],
                interval: interval(
                    boot,
                    CoefficientId::Path {
                        source: source.clone(),
                        target: target.clone(),
                    },
                ),
                source,
                target,
            }
        })
        .collect();
    FitSection {
        iterations: fit.iterations,
        converged: fit.converged,
        constructs,
        paths,
    }
}

/// Step-2 fit section restricted to the re-estimated target blocks.
fn step2_section(cyc: &CyclicFit, boot: Option<&BootstrapResult>) -> FitSection {
    // step-2 replicates are stored under the cyclic ids, not the sequential ones
    let mut section = fit_section(&cyc.step2, None);
    section.constructs.remove(0);
    for p in &mut section.paths {
        p.interval = interval(
            boot,
            CoefficientId::Cyclic {
                source: p.source.clone(),
                target: p.target.clone(),
            },
        );
    }
    section
}

fn cyclic_pairs(
    cyc: &CyclicFit,
    boot: Option<&BootstrapResult>,
    n: usize,
    direction: Direction,
) -> Vec<CyclicPair> {
    cyc.paths
        .iter()
        .map(|p| {
            let ce_id = CoefficientId::Cyclic {
                source: p.source.clone(),
                target: p.target.clone(),
            };
            let se_id = CoefficientId::Path {
                source: p.target.clone(),
                target: p.source.clone(),
            };
            let mut pair = CyclicPair {
                source: p.source.clone(),
                target: p.target.clone(),
                beta_ce: p.beta_ce,
                beta_ce_interval: interval(boot, ce_id.clone()),
                beta_se: p.beta_se,
                abs_diff: p.beta_se.map(|se| (se - p.beta_ce).abs()),
                sigma_se: None,
                sigma_ce: None,
                t: None,
                df: None,
                p: None,
                decision: None,
                diagnostic: p.diagnostic.clone(),
            };
            let Some(beta_se) = p.beta_se else {
                return pair;
            };
            let Some(boot) = boot else {
                pair.diagnostic = Some("bootstrap disabled; reinforcement test needs standard errors".into());
                return pair;
            };
            let sigma_se = boot.get(&se_id).map(|c| c.se).expect("sequential path bootstrapped");
            let sigma_ce = boot.get(&ce_id).map(|c| c.se).expect("cyclic path bootstrapped");
            pair.sigma_se = Some(sigma_se);
            pair.sigma_ce = Some(sigma_ce);
            match reinforcement_test(beta_se, p.beta_ce, sigma_se, sigma_ce, n, direction) {
                Ok(r) => {
                    pair.t = Some(r.t);
                    pair.df = Some(r.df);
                    pair.p = Some(r.p_value);
                    pair.decision = Some(if r.reject { Decision::Reject } else { Decision::Retain });
                }
                Err(e @ (TestError::NonPositiveSigma { .. } | TestError::SampleTooSmall(_))) => {
                    pair.diagnostic = Some(format!("reinforcement test skipped: {e}"));
                }
            }
            pair
        })
        .collect()
}

fn validate_against(spec: &ModelSpec, raw: &RawTable) -> Result<(), RunError> {
    let report = validate_model(spec, &raw.header);
    if report.is_empty() {
        Ok(())
    } else {
        Err(RunError::validation(format!("invalid model:\n{report}")))
    }
}

fn prepared(spec: &ModelSpec, raw: &RawTable, cfg: &RunConfig) -> Result<(ModelSpec, PreparedData, PlsFit), RunError> {
    let mut spec = spec.clone();
    if let Some(s) = cfg.scheme {
        spec.scheme = s;
    }
    validate_against(&spec, raw)?;
    if cfg.bootstrap > 0 {
        // fail fast on bad resampling flags, before any estimation
        if cfg.bootstrap < crate::resample::MIN_REPLICATES {
            return Err(BootstrapError::TooFewReplicates(cfg.bootstrap).into());
        }
        if !(cfg.level > 0.0 && cfg.level < 1.0) {
            return Err(BootstrapError::InvalidLevel(cfg.level).into());
        }
    }
    let data = prepare_blocks(raw, &spec, cfg.missing)?;
    let fit = fit_pls(&data, &spec, cfg.fit)?;
    if !fit.converged {
        return Err(RunError::estimation(format!(
            "outer weights did not converge after {} iterations",
            fit.iterations
        )));
    }
    Ok((spec, data, fit))
}

fn run(command: Command, spec: &ModelSpec, raw: &RawTable, cfg: &RunConfig) -> Result<RunReport, RunError> {
    if command == Command::Cyclic {
        check_cyclic_model(spec).or_else(|e| match e {
            // column problems surface through the full validation below
            CyclicError::Invalid(_) => Ok(()),
            e => Err(e),
        })?;
    }
    let (spec, data, fit) = prepared(spec, raw, cfg)?;
    let copts = CyclicOptions {
        fit: cfg.fit,
        inner: cfg.step2_inner,
    };
    let cyc = match command {
        Command::Cyclic => Some(estimate_cyclic(&data, &fit, &spec, copts)?),
        Command::Fit => None,
    };
    let boot = if cfg.bootstrap > 0 {
        let opts = BootstrapOptions {
            replicates: cfg.bootstrap,
            level: cfg.level,
            seed: cfg.seed,
            fit: cfg.fit,
            cyclic: cyc.as_ref().map(|_| copts),
        };
        Some(bootstrap_around(&data, &spec, &opts, &fit, cyc.as_ref())?)
    } else {
        None
    };
    let boot = boot.as_ref();

    let cyclic = cyc.as_ref().map(|c| CyclicSection {
        direction: cfg.direction,
        step2_inner: cfg.step2_inner,
        n: data.n_effective,
        step2: step2_section(c, boot),
        pairs: cyclic_pairs(c, boot, data.n_effective, cfg.direction),
    });

    Ok(RunReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command,
        seed: cfg.seed,
        settings: Settings {
            scheme: spec.scheme,
            tol: cfg.fit.tol,
            max_iter: cfg.fit.max_iter,
            missing: cfg.missing,
            bootstrap: cfg.bootstrap,
            level: cfg.level,
            direction: cyclic.as_ref().map(|_| cfg.direction),
            step2_inner: cyclic.as_ref().map(|_| cfg.step2_inner),
        },
        data: DataSummary {
            n_total: data.n_total,
            n_effective: data.n_effective,
            missing: data
                .missing
                .iter()
                .map(|(c, m)| MissingCount {
                    construct: c.clone(),
                    cells: *m,
                })
                .collect(),
        },
        fit: fit_section(&fit, boot),
        assessment: assess(&fit, &data, boot),
        bootstrap: boot.map(|b| BootstrapSummary {
            replicates: b.requested,
            failed: b.failed,
            level: b.level,
            seed: b.seed,
        }),
        cyclic,
        mca: (!data.mca.is_empty()).then(|| data.mca.clone()),
        model: spec,
    })
}

/// Sequential fit with assessment and (optionally) bootstrap intervals.
pub fn run_fit(spec: &ModelSpec, raw: &RawTable, cfg: &RunConfig) -> Result<RunReport, RunError> {
    run(Command::Fit, spec, raw, cfg)
}

/// Both estimation steps plus the reinforcement tests.
pub fn run_cyclic(spec: &ModelSpec, raw: &RawTable, cfg: &RunConfig) -> Result<RunReport, RunError> {
    run(Command::Cyclic, spec, raw, cfg)
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn opt3(v: Option<f64>) -> String {
    v.map_or_else(String::new, f3)
}

/// Left-aligned first column(s), right-aligned numbers.
fn render_table(out: &mut String, header: &[&str], rows: &[Vec<String>], left: usize) {
    let width = |s: &str| s.chars().count();
    let mut widths: Vec<usize> = header.iter().map(|h| width(h)).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(width(cell));
        }
    }
    let line = |out: &mut String, cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = " ".repeat(w - width(cell));
            if i > 0 {
                s.push_str("  ");
            }
            if i < left {
                s.push_str(cell);
                s.push_str(&pad);
            } else {
                s.push_str(&pad);
                s.push_str(cell);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    line(out, &header);
    let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        line(out, row);
    }
}

/// Scale validation table: reliability indices per construct followed by
/// loadings with their bootstrap intervals.
pub fn outer_model_table(report: &RunReport) -> String {
    let level = report.bootstrap.as_ref().map_or(report.settings.level, |b| b.level);
    let ci_header = format!("{:.0}% CI", level * 100.0);
    let header = [
        "LV",
        "Indicator",
        "Cronbach's α",
        "CR",
        "PCA eigen. 1",
        "PCA eigen. 2",
        "Dijkstra's ρ_A",
        "AVE",
        "Orig.",
        ci_header.as_str(),
    ];
    let mut rows = Vec::new();
    for c in &report.assessment.constructs {
        if c.mode.is_single_column() {
            let ind = c.indicators.first();
            rows.push(vec![
                c.construct.clone(),
                ind.map_or_else(String::new, |i| i.name.clone()),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                ind.map_or_else(String::new, |i| f3(i.loading)),
                String::new(),
            ]);
            continue;
        }
        rows.push(vec![
            c.construct.clone(),
            String::new(),
            opt3(c.alpha),
            opt3(c.composite_reliability),
            opt3(c.eig1),
            opt3(c.eig2),
            opt3(c.rho_a),
            opt3(c.ave),
            String::new(),
            String::new(),
        ]);
        for i in &c.indicators {
            let ci = match (i.ci_lower, i.ci_upper) {
                (Some(lo), Some(hi)) => format!("{} {}", f3(lo), f3(hi)),
                _ => String::new(),
            };
            let mut row = vec![String::new(), i.name.clone()];
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.push(f3(i.loading));
            row.push(ci);
            rows.push(row);
        }
    }
    let mut out = String::new();
    render_table(&mut out, &header, &rows, 2);
    out
}

fn path_rows(section: &FitSection, constructs: &[ConstructFit]) -> Vec<Vec<String>> {
    section
        .paths
        .iter()
        .map(|p| {
            let r2 = constructs
                .iter()
                .find(|c| c.construct == p.target)
                .and_then(|c| c.r_squared);
            let (se, ci) = match &p.interval {
                Some(i) => (f3(i.se), format!("{} {}", f3(i.ci_lower), f3(i.ci_upper))),
                None => (String::new(), String::new()),
            };
            vec![
                format!("{} -> {}", p.source, p.target),
                f3(p.estimate),
                se,
                ci,
                opt3(r2),
            ]
        })
        .collect()
}

/// Path coefficients with bootstrap SE, interval and the target's R².
pub fn inner_model_table(report: &RunReport) -> String {
    let mut out = String::new();
    render_table(
        &mut out,
        &["Path", "Estimate", "SE", "CI", "R² (target)"],
        &path_rows(&report.fit, &report.fit.constructs),
        1,
    );
    out
}

/// Sequential versus cyclic comparison, one row per pair.
pub fn cyclic_table(section: &CyclicSection) -> String {
    let rows: Vec<Vec<String>> = section
        .pairs
        .iter()
        .map(|p| {
            vec![
                format!("{} ⇌ {}", p.target, p.source),
                opt3(p.beta_se),
                f3(p.beta_ce),
                opt3(p.abs_diff),
                opt3(p.t),
                opt3(p.p),
            ]
        })
        .collect();
    let mut out = String::new();
    render_table(
        &mut out,
        &["Effects", "SE", "CE", "Abs (diff.)", "t-statistic", "p-value"],
        &rows,
        1,
    );
    out.push_str("SE, sequential effect; CE, cyclic effect.\n");
    out
}

/// Human-readable rendering of a whole report.
pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} ({:?}), N = {} of {} rows, {} iterations{}",
        report.tool,
        report.version,
        report.command,
        report.data.n_effective,
        report.data.n_total,
        report.fit.iterations,
        if report.fit.converged { "" } else { " (not converged)" },
    );
    if let Some(b) = &report.bootstrap {
        let _ = writeln!(
            out,
            "bootstrap: {} replicates ({} failed), seed {}",
            b.replicates, b.failed, b.seed
        );
    }
    out.push_str("\nOuter model\n\n");
    out.push_str(&outer_model_table(report));
    out.push_str("\nInner model\n\n");
    out.push_str(&inner_model_table(report));
    if let Some(mca) = &report.mca {
        out.push_str("\nMCA\n\n");
        for m in mca {
            let shares: Vec<String> = m.inertia_shares.iter().take(3).map(|s| f3(*s)).collect();
            let _ = writeln!(out, "{}: inertia shares {}", m.construct, shares.join(", "));
        }
    }
    if let Some(c) = &report.cyclic {
        out.push_str("\nCyclic effects\n\n");
        let mut rows = path_rows(&c.step2, &c.step2.constructs);
        for r in &mut rows {
            r.pop();
        }
        render_table(&mut out, &["Path", "Estimate", "SE", "CI"], &rows, 1);
        out.push_str("\nReinforcement test\n\n");
        out.push_str(&cyclic_table(c));
        for p in &c.pairs {
            if let Some(d) = &p.diagnostic {
                let _ = writeln!(out, "note ({} ⇌ {}): {d}", p.target, p.source);
            }
        }
    }
    out
}
