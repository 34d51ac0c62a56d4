//! PLS path-modeling estimator: alternating outer and inner estimation until
//! the outer weights stop moving, followed by loadings, path coefficients and
//! R².
//!
//! After the indicator correlation matrix is formed, the iteration never looks
//! at individual observations again; scores are produced at the very end.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dataset::PreparedData;
use crate::modelspec::{Mode, ModelSpec, Scheme};
use crate::moments;

/// Eigenvalue floor below which a predictor correlation matrix is singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("construct `{0}` has no columns in the prepared data")]
    MissingBlock(String),
    #[error("construct `{construct}` is declared {mode} but has {found} data columns")]
    BlockArity {
        construct: String,
        mode: Mode,
        found: usize,
    },
    #[error("indicator `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("inner proxy of `{0}` vanished; outer weights are undefined")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 300,
        }
    }
}

/// Outer weights per construct (block order of the model), scaled so each
/// score has unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterWeights(pub Vec<DVector<f64>>);

impl OuterWeights {
    pub fn block(&self, k: usize) -> &DVector<f64> {
        &self.0[k]
    }
}

/// Where to start and how to orient the weights.
#[derive(Debug, Clone, Default)]
pub struct Start<'a> {
    /// Initial weights; equal weights when absent.
    pub init: Option<&'a OuterWeights>,
    /// Orient each block towards these weights instead of the default
    /// non-negative loading sum rule (used for bootstrap sign alignment).
    pub orient_to: Option<&'a OuterWeights>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlsFit {
    pub constructs: Vec<String>,
    pub modes: Vec<Mode>,
    /// Data column names per construct.
    pub indicators: Vec<Vec<String>>,
    pub weights: OuterWeights,
    /// Indicator-score correlations per construct.
    pub loadings: Vec<Vec<f64>>,
    /// N x K latent scores, columns in construct order.
    pub scores: DMatrix<f64>,
    pub score_correlation: DMatrix<f64>,
    /// `paths[(source, target)]`; zero where no path is declared.
    pub paths: DMatrix<f64>,
    /// Declared edges as (source, target) indices, in model order.
    pub edges: Vec<(usize, usize)>,
    /// R² per construct; `None` for exogenous constructs.
    pub r_squared: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl PlsFit {
    pub fn index_of(&self, construct: &str) -> Option<usize> {
        self.constructs.iter().position(|c| c == construct)
    }

    pub fn path(&self, source: &str, target: &str) -> Option<f64> {
        let (s, t) = (self.index_of(source)?, self.index_of(target)?);
        self.edges.contains(&(s, t)).then(|| self.paths[(s, t)])
    }

    pub fn score(&self, construct: &str) -> Option<Vec<f64>> {
        let k = self.index_of(construct)?;
        Some(self.scores.column(k).iter().copied().collect())
    }

    pub fn r_squared_of(&self, construct: &str) -> Option<f64> {
        self.r_squared[self.index_of(construct)?]
    }
}

struct Layout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl Layout {
    fn sub(&self, m: &DMatrix<f64>, a: usize, b: usize) -> DMatrix<f64> {
        m.view((self.offsets[a], self.offsets[b]), (self.sizes[a], self.sizes[b]))
            .into_owned()
    }
}

pub fn fit_pls(data: &PreparedData, spec: &ModelSpec, opts: FitOptions) -> Result<PlsFit, FitError> {
    fit_pls_from(data, spec, opts, Start::default())
}

pub fn fit_pls_from(
    data: &PreparedData,
    spec: &ModelSpec,
    opts: FitOptions,
    start: Start<'_>,
) -> Result<PlsFit, FitError> {
    let k_count = spec.blocks.len();
    let mut ranges = Vec::with_capacity(k_count);
    for block in &spec.blocks {
        let range = data
            .block_range(&block.name)
            .ok_or_else(|| FitError::MissingBlock(block.name.clone()))?;
        let found = range.len();
        let ok = match block.mode {
            Mode::SingleItem | Mode::McaSingleItem => found == 1,
            Mode::Reflective | Mode::Formative => found >= 1,
        };
        if !ok {
            return Err(FitError::BlockArity {
                construct: block.name.clone(),
                mode: block.mode,
                found,
            });
        }
        ranges.push(range);
    }

    let total: usize = ranges.iter().map(|r| r.len()).sum();
    let mut x = DMatrix::zeros(data.n_rows(), total);
    let mut offsets = Vec::with_capacity(k_count);
    let mut col = 0;
    for r in &ranges {
        offsets.push(col);
        for j in r.clone() {
            x.set_column(col, &data.matrix.column(j));
            col += 1;
        }
    }
    let layout = Layout {
        offsets,
        sizes: ranges.iter().map(|r| r.len()).collect(),
    };
    let indicators: Vec<Vec<String>> = ranges
        .iter()
        .map(|r| data.columns[r.clone()].to_vec())
        .collect();

    let corr = moments::correlation_matrix(&x);
    for j in 0..total {
        if corr[(j, j)].is_nan() {
            let name = indicators.iter().flatten().nth(j).cloned().unwrap_or_default();
            return Err(FitError::ZeroVariance(name));
        }
    }

    let modes: Vec<Mode> = spec.blocks.iter().map(|b| b.mode).collect();
    let edges = spec.edges();
    let block_corr: Vec<DMatrix<f64>> = (0..k_count).map(|k| layout.sub(&corr, k, k)).collect();

    let mut weights: Vec<DVector<f64>> = match start.init {
        Some(init) => init.0.clone(),
        None => layout.sizes.iter().map(|&p| DVector::from_element(p, 1.0)).collect(),
    };
    for k in 0..k_count {
        if modes[k].is_single_column() {
            weights[k] = DVector::from_element(1, 1.0);
        }
        weights[k] = normalize(&weights[k], &block_corr[k])
            .ok_or_else(|| FitError::Degenerate(spec.blocks[k].name.clone()))?;
    }

    let neighbours: Vec<Vec<usize>> = (0..k_count)
        .map(|k| {
            let mut n: Vec<usize> = spec.predecessors(k);
            n.extend(spec.successors(k));
            n.sort_unstable();
            n.dedup();
            n
        })
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let lv_corr = score_correlations(&weights, &corr, &layout);
        let inner = inner_weights(spec, &lv_corr, spec.scheme)?;
        let mut delta: f64 = 0.0;
        let mut next = weights.clone();
        for k in 0..k_count {
            if modes[k].is_single_column() || neighbours[k].is_empty() {
                continue;
            }
            // covariance of block k's indicators with its inner proxy
            let mut cov = DVector::zeros(layout.sizes[k]);
            for &j in &neighbours[k] {
                cov += layout.sub(&corr, k, j) * &weights[j] * inner[(k, j)];
            }
            let raw = match modes[k] {
                Mode::Formative => moments::solve_spd(&block_corr[k], &cov, SINGULAR_TOL)
                    .ok_or_else(|| {
                        FitError::Singular(format!(
                            "indicator correlations of formative block `{}`",
                            spec.blocks[k].name
                        ))
                    })?,
                _ => cov,
            };
            let w = normalize(&raw, &block_corr[k])
                .ok_or_else(|| FitError::Degenerate(spec.blocks[k].name.clone()))?;
            delta = delta.max((&w - &weights[k]).amax());
            next[k] = w;
        }
        weights = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    // orientation
    for k in 0..k_count {
        let flip = match start.orient_to {
            Some(reference) => weights[k].dot(&reference.0[k]) < 0.0,
            None => (&block_corr[k] * &weights[k]).sum() < 0.0,
        };
        if flip {
            weights[k] = -&weights[k];
        }
    }

    let loadings: Vec<Vec<f64>> = (0..k_count)
        .map(|k| (&block_corr[k] * &weights[k]).iter().copied().collect())
        .collect();
    let score_correlation = score_correlations(&weights, &corr, &layout);
    let (paths, r_squared) = structural_ols(&score_correlation, spec)?;

    let mut scores = DMatrix::zeros(data.n_rows(), k_count);
    for k in 0..k_count {
        let block = x.columns(layout.offsets[k], layout.sizes[k]);
        scores.set_column(k, &(block * &weights[k]));
    }

    Ok(PlsFit {
        constructs: spec.blocks.iter().map(|b| b.name.clone()).collect(),
        modes,
        indicators,
        weights: OuterWeights(weights),
        loadings,
        scores,
        score_correlation,
        paths,
        edges,
        r_squared,
        iterations,
        converged,
    })
}

fn normalize(w: &DVector<f64>, block_corr: &DMatrix<f64>) -> Option<DVector<f64>> {
    let var = w.dot(&(block_corr * w));
    (var > 1e-300 && var.is_finite()).then(|| w / var.sqrt())
}

fn score_correlations(weights: &[DVector<f64>], corr: &DMatrix<f64>, layout: &Layout) -> DMatrix<f64> {
    let k = weights.len();
    let mut c = DMatrix::identity(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let v = weights[a].dot(&(layout.sub(corr, a, b) * &weights[b]));
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

/// Inner weights `e[(k, j)]`: how neighbour j enters construct k's proxy.
fn inner_weights(spec: &ModelSpec, lv_corr: &DMatrix<f64>, scheme: Scheme) -> Result<DMatrix<f64>, FitError> {
    let k_count = spec.blocks.len();
    let mut e = DMatrix::zeros(k_count, k_count);
    for k in 0..k_count {
        let preds = spec.predecessors(k);
        let succs = spec.successors(k);
        match scheme {
            Scheme::Centroid | Scheme::Factorial => {
                for &j in preds.iter().chain(&succs) {
                    let r = lv_corr[(k, j)];
                    e[(k, j)] = if scheme == Scheme::Factorial {
                        r
                    } else if r < 0.0 {
                        -1.0
                    } else {
                        1.0
                    };
                }
            }
            Scheme::Path => {
                for &j in &succs {
                    e[(k, j)] = lv_corr[(k, j)];
                }
                if !preds.is_empty() {
                    let beta = regress(lv_corr, &preds, k).ok_or_else(|| {
                        FitError::Singular(format!(
                            "predecessors of `{}` in the inner weighting",
                            spec.blocks[k].name
                        ))
                    })?;
                    for (&j, b) in preds.iter().zip(beta.iter()) {
                        e[(k, j)] = *b;
                    }
                }
            }
        }
    }
    Ok(e)
}

/// Standardized OLS coefficients of `target` on `predictors` given their
/// correlation matrix.
fn regress(corr: &DMatrix<f64>, predictors: &[usize], target: usize) -> Option<DVector<f64>> {
    let rxx = corr.select_rows(predictors).select_columns(predictors);
    let rxy = DVector::from_iterator(predictors.len(), predictors.iter().map(|&j| corr[(j, target)]));
    moments::solve_spd(&rxx, &rxy, SINGULAR_TOL)
}

/// Path coefficients and R² for every endogenous construct, from the
/// construct correlation matrix.
pub(crate) fn structural_ols(
    lv_corr: &DMatrix<f64>,
    spec: &ModelSpec,
) -> Result<(DMatrix<f64>, Vec<Option<f64>>), FitError> {
    let k_count = spec.blocks.len();
    let mut paths = DMatrix::zeros(k_count, k_count);
    let mut r2 = vec![None; k_count];
    for k in 0..k_count {
        let preds = spec.predecessors(k);
        if preds.is_empty() {
            continue;
        }
        let beta = regress(lv_corr, &preds, k).ok_or_else(|| {
            FitError::Singular(format!("predecessors of `{}` are collinear", spec.blocks[k].name))
        })?;
        let mut explained = 0.0;
        for (&j, &b) in preds.iter().zip(beta.iter()) {
            paths[(j, k)] = b;
            explained += b * lv_corr[(j, k)];
        }
        r2[k] = Some(explained);
    }
    Ok((paths, r2))
}

/// OLS of each endogenous score column on its predecessors' columns.
/// Returns `(paths, r_squared)` laid out as in [`PlsFit`].
pub fn path_coefficients(
    scores: &DMatrix<f64>,
    spec: &ModelSpec,
) -> Result<(DMatrix<f64>, Vec<Option<f64>>), FitError> {
    structural_ols(&moments::correlation_matrix(scores), spec)
}

/// Pearson correlation of every indicator with its construct score.
pub fn loadings(data: &PreparedData, scores: &DMatrix<f64>, spec: &ModelSpec) -> Result<Vec<Vec<f64>>, FitError> {
    spec.blocks
        .iter()
        .enumerate()
        .map(|(k, block)| {
            let range = data
                .block_range(&block.name)
                .ok_or_else(|| FitError::MissingBlock(block.name.clone()))?;
            let score = scores.column(k);
            Ok(range
                .map(|j| moments::pearson(data.matrix.column(j).as_slice(), score.as_slice()))
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspec::parse_model;

    fn chain_spec(mode: &str) -> ModelSpec {
        parse_model(&format!(
            r#"{{"blocks":[
                {{"name":"A","mode":"{mode}","indicators":["a"]}},
                {{"name":"B","mode":"{mode}","indicators":["b"]}},
                {{"name":"C","mode":"{mode}","indicators":["c"]}}],
              "paths":[{{"source":"A","target":"B"}},{{"source":"B","target":"C"}}]}}"#
        ))
        .unwrap()
    }

    fn small_data() -> PreparedData {
        let n = 40;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        let t = i as f64;
                        (t * (0.3 + j as f64)).sin() + 0.5 * (t * 0.7).cos() * j as f64
                    })
                    .collect()
            })
            .map(|c: Vec<f64>| moments::standardize(&c).unwrap())
            .collect();
        let m = DMatrix::from_fn(n, 3, |i, j| cols[j][i]);
        PreparedData::from_standardized(
            vec!["a".into(), "b".into(), "c".into()],
            m,
            &[("A", &["a"]), ("B", &["b"]), ("C", &["c"])],
        )
    }

    #[test]
    fn single_item_chain_reduces_to_correlations() {
        let data = small_data();
        let fit = fit_pls(&data, &chain_spec("single-item"), FitOptions::default()).unwrap();
        assert!(fit.converged);
        let rab = moments::pearson_columns(&data.matrix, 0, 1);
        let rbc = moments::pearson_columns(&data.matrix, 1, 2);
        assert!((fit.path("A", "B").unwrap() - rab).abs() < 1e-12);
        assert!((fit.path("B", "C").unwrap() - rbc).abs() < 1e-12);
        assert!((fit.r_squared_of("B").unwrap() - rab * rab).abs() < 1e-12);
        assert_eq!(fit.r_squared_of("A"), None);
        for k in 0..3 {
            assert_eq!(fit.weights.block(k).as_slice(), &[1.0]);
            for i in 0..data.n_rows() {
                assert!((fit.scores[(i, k)] - data.matrix[(i, k)]).abs() < 1e-14);
            }
        }
        assert_eq!(fit.path("A", "C"), None);
    }

    #[test]
    fn simple_regression_equals_correlation() {
        // corr 0.6 → beta 0.6, R² 0.36
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let spec = parse_model(
            r#"{"blocks":[{"name":"X","mode":"single-item","indicators":["x"]},
                          {"name":"Y","mode":"single-item","indicators":["y"]}],
                "paths":[{"source":"X","target":"Y"}]}"#,
        )
        .unwrap();
        let (paths, r2) = structural_ols(&c, &spec).unwrap();
        assert!((paths[(0, 1)] - 0.6).abs() < 1e-15);
        assert!((r2[1].unwrap() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn two_predictor_normal_equations() {
        // r12 = 0.5, r1y = r2y = 0.6: beta = 0.6 / 1.5 = 0.4 each, R² = 0.48
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.6, 0.5, 1.0, 0.6, 0.6, 0.6, 1.0]);
        let spec = parse_model(
            r#"{"blocks":[{"name":"X1","mode":"single-item","indicators":["a"]},
                          {"name":"X2","mode":"single-item","indicators":["b"]},
                          {"name":"Y","mode":"single-item","indicators":["y"]}],
                "paths":[{"source":"X1","target":"Y"},{"source":"X2","target":"Y"}]}"#,
        )
        .unwrap();
        let (paths, r2) = structural_ols(&c, &spec).unwrap();
        assert!((paths[(0, 2)] - 0.4).abs() < 1e-14);
        assert!((paths[(1, 2)] - 0.4).abs() < 1e-14);
        assert!((r2[2].unwrap() - 0.48).abs() < 1e-14);
    }

    #[test]
    fn duplicated_predictor_is_singular() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.6, 1.0, 1.0, 0.6, 0.6, 0.6, 1.0]);
        let spec = parse_model(
            r#"{"blocks":[{"name":"X1","mode":"single-item","indicators":["a"]},
                          {"name":"X2","mode":"single-item","indicators":["b"]},
                          {"name":"Y","mode":"single-item","indicators":["y"]}],
                "paths":[{"source":"X1","target":"Y"},{"source":"X2","target":"Y"}]}"#,
        )
        .unwrap();
        let err = structural_ols(&c, &spec).unwrap_err();
        assert!(err.to_string().starts_with("singular system"), "{err}");
    }

    #[test]
    fn indicator_identical_to_score_loads_one() {
        let data = small_data();
        let fit = fit_pls(&data, &chain_spec("single-item"), FitOptions::default()).unwrap();
        let l = loadings(&data, &fit.scores, &chain_spec("single-item")).unwrap();
        for block in &l {
            assert!((block[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_block_and_arity_errors() {
        let data = small_data();
        let mut spec = chain_spec("single-item");
        spec.blocks[2].name = "Z".into();
        spec.paths[1].target = "Z".into();
        assert_eq!(
            fit_pls(&data, &spec, FitOptions::default()).unwrap_err(),
            FitError::MissingBlock("Z".into())
        );
        let wide = PreparedData::from_standardized(
            data.columns.clone(),
            data.matrix.clone(),
            &[("A", &["a", "b"]), ("B", &["c"]), ("C", &["c"])],
        );
        assert!(matches!(
            fit_pls(&wide, &chain_spec("single-item"), FitOptions::default()),
            Err(FitError::BlockArity { found: 2, .. })
        ));
    }
}
