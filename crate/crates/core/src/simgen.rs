//! Synthetic populations with known measurement and structural parameters.
//!
//! Constructs follow `xi = B' xi + zeta` (with `B[(j, k)]` the effect of j on
//! k), solved as `xi = (I - B')^{-1} zeta` and rescaled to unit population
//! variance. Acyclic and cyclic (equilibrium) generation share this code path;
//! they differ only in the structural pre-conditions they enforce.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RawTable;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid population: {0}")]
    Invalid(String),
    #[error("structural graph is cyclic; use equilibrium generation")]
    NotAcyclic,
    #[error("no equilibrium: spectral radius of B is {0:.6} (must be < 1)")]
    NoEquilibrium(f64),
    #[error("implied variance of `{construct}` is {value} (must be positive)")]
    Variance { construct: String, value: f64 },
    #[error("cannot read population spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed population spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// How a construct shows up in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Measurement {
    /// `x_j = l_j xi + sqrt(1 - l_j^2) e_j`.
    Reflective { loadings: Vec<f64> },
    /// Indicators with identity correlation whose regression weights on the
    /// construct are `weights` (`|weights| <= 1`).
    Formative { weights: Vec<f64> },
    /// The construct itself.
    SingleItem,
    /// Reflective indicators cut at `thresholds` (0 when omitted) into 0/1.
    Binary {
        loadings: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thresholds: Option<Vec<f64>>,
    },
}

impl Measurement {
    pub fn width(&self) -> usize {
        match self {
            Measurement::Reflective { loadings } | Measurement::Binary { loadings, .. } => loadings.len(),
            Measurement::Formative { weights } => weights.len(),
            Measurement::SingleItem => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructSpec {
    pub name: String,
    pub measurement: Measurement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationPath {
    pub source: String,
    pub target: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Acyclic,
    CyclicEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub constructs: Vec<ConstructSpec>,
    #[serde(default)]
    pub paths: Vec<PopulationPath>,
    /// Diagonal of Psi. When absent it is solved so that every construct has
    /// unit variance before rescaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_variances: Option<Vec<f64>>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to acyclic for DAGs and equilibrium otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

impl PopulationSpec {
    pub fn from_json(document: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(document)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.constructs.iter().position(|c| c.name == name)
    }

    /// `B[(source, target)]`.
    pub fn structural_matrix(&self) -> Result<DMatrix<f64>, SimError> {
        let k = self.constructs.len();
        let mut b = DMatrix::zeros(k, k);
        for p in &self.paths {
            let find = |n: &str| {
                self.index_of(n)
                    .ok_or_else(|| SimError::Invalid(format!("path references unknown construct `{n}`")))
            };
            let (s, t) = (find(&p.source)?, find(&p.target)?);
            if s == t {
                return Err(SimError::Invalid(format!("self-loop on `{}`", p.source)));
            }
            b[(s, t)] = p.coefficient;
        }
        Ok(b)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.constructs
            .iter()
            .flat_map(|c| match c.measurement {
                Measurement::SingleItem => vec![c.name.clone()],
                ref m => (1..=m.width()).map(|j| format!("{}_{j}", c.name)).collect(),
            })
            .collect()
    }

    fn check(&self) -> Result<(), SimError> {
        if self.constructs.is_empty() {
            return Err(SimError::Invalid("no constructs".into()));
        }
        if self.n < 2 {
            return Err(SimError::Invalid(format!("n must be at least 2, got {}", self.n)));
        }
        for (i, c) in self.constructs.iter().enumerate() {
            if self.constructs[..i].iter().any(|d| d.name == c.name) {
                return Err(SimError::Invalid(format!("duplicate construct `{}`", c.name)));
            }
            if c.measurement.width() == 0 {
                return Err(SimError::Invalid(format!("construct `{}` has no indicators", c.name)));
            }
            match &c.measurement {
                Measurement::Reflective { loadings } | Measurement::Binary { loadings, .. } => {
                    if let Some(l) = loadings.iter().find(|l| !(l.abs() < 1.0)) {
                        return Err(SimError::Invalid(format!(
                            "loading {l} of `{}` must lie in (-1, 1)",
                            c.name
                        )));
                    }
                }
                Measurement::Formative { weights } => {
                    let norm2: f64 = weights.iter().map(|w| w * w).sum();
                    if norm2 > 1.0 + 1e-12 {
                        return Err(SimError::Invalid(format!(
                            "formative weights of `{}` have squared norm {norm2} > 1",
                            c.name
                        )));
                    }
                }
                Measurement::SingleItem => {}
            }
            if let Measurement::Binary {
                loadings,
                thresholds: Some(t),
            } = &c.measurement
            {
                if t.len() != loadings.len() {
                    return Err(SimError::Invalid(format!(
                        "`{}` has {} thresholds for {} loadings",
                        c.name,
                        t.len(),
                        loadings.len()
                    )));
                }
            }
        }
        if let Some(psi) = &self.disturbance_variances {
            if psi.len() != self.constructs.len() {
                return Err(SimError::Invalid(format!(
                    "{} disturbance variances for {} constructs",
                    psi.len(),
                    self.constructs.len()
                )));
            }
        }
        Ok(())
    }
}

/// Whether `b` is nilpotent as a graph (some ordering makes it triangular).
pub fn is_acyclic(b: &DMatrix<f64>) -> bool {
    let k = b.nrows();
    let mut indegree: Vec<usize> = (0..k)
        .map(|t| (0..k).filter(|&s| b[(s, t)] != 0.0).count())
        .collect();
    let mut ready: Vec<usize> = (0..k).filter(|&t| indegree[t] == 0).collect();
    let mut seen = 0;
    while let Some(s) = ready.pop() {
        seen += 1;
        for t in 0..k {
            if b[(s, t)] != 0.0 {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
    }
    seen == k
}

pub fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    b.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Population moments implied by a specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub generator: Generator,
    pub constructs: Vec<String>,
    pub columns: Vec<String>,
    pub measurement: Vec<Measurement>,
    /// Raw structural coefficients `B[source][target]`.
    pub structural: Vec<Vec<f64>>,
    /// Coefficients on the unit-variance construct scale.
    pub standardized_structural: Vec<Vec<f64>>,
    pub disturbance_variances: Vec<f64>,
    /// Population correlation matrix of the constructs.
    pub construct_correlation: Vec<Vec<f64>>,
    pub n: usize,
    pub seed: u64,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

struct Structure {
    /// `(I - B')^{-1}`: maps disturbances to constructs.
    transfer: DMatrix<f64>,
    psi: Vec<f64>,
    /// Population SD of each construct before rescaling.
    sd: Vec<f64>,
    correlation: DMatrix<f64>,
}

fn structure(pop: &PopulationSpec, b: &DMatrix<f64>) -> Result<Structure, SimError> {
    let k = b.nrows();
    let transfer = (DMatrix::identity(k, k) - b.transpose())
        .try_inverse()
        .ok_or_else(|| SimError::Invalid("I - B is singular".into()))?;
    let psi = match &pop.disturbance_variances {
        Some(psi) => psi.clone(),
        None => {
            // diag(A diag(psi) A') = 1 is linear in psi
            let sq = transfer.map(|a| a * a);
            let psi = sq
                .lu()
                .solve(&DVector::from_element(k, 1.0))
                .ok_or_else(|| SimError::Invalid("cannot solve for unit-variance disturbances".into()))?;
            psi.iter().copied().collect()
        }
    };
    for (c, &v) in pop.constructs.iter().zip(&psi) {
        if !(v > 0.0) {
            return Err(SimError::Variance {
                construct: c.name.clone(),
                value: v,
            });
        }
    }
    let cov = &transfer * DMatrix::from_diagonal(&DVector::from_vec(psi.clone())) * transfer.transpose();
    let sd: Vec<f64> = (0..k).map(|i| cov[(i, i)].sqrt()).collect();
    let correlation = DMatrix::from_fn(k, k, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    Ok(Structure {
        transfer,
        psi,
        sd,
        correlation,
    })
}

/// `L` with `L L' = I - w w'` (symmetric square root).
fn formative_loading_root(weights: &[f64]) -> DMatrix<f64> {
    let p = weights.len();
    let w = DVector::from_column_slice(weights);
    let m = DMatrix::identity(p, p) - &w * w.transpose();
    let eig = m.symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

fn generate(pop: &PopulationSpec, generator: Generator) -> Result<(RawTable, Truth), SimError> {
    pop.check()?;
    let b = pop.structural_matrix()?;
    match generator {
        Generator::Acyclic if !is_acyclic(&b) => return Err(SimError::NotAcyclic),
        Generator::CyclicEquilibrium => {
            let rho = spectral_radius(&b);
            // eigen-solver roundoff can put a unit root just under 1
            if rho >= 1.0 - 1e-9 {
                return Err(SimError::NoEquilibrium(rho));
            }
        }
        _ => {}
    }
    let st = structure(pop, &b)?;
    let k = pop.constructs.len();
    let psi_sd: Vec<f64> = st.psi.iter().map(|v| v.sqrt()).collect();
    let roots: Vec<Option<DMatrix<f64>>> = pop
        .constructs
        .iter()
        .map(|c| match &c.measurement {
            Measurement::Formative { weights } => Some(formative_loading_root(weights)),
            _ => None,
        })
        .collect();
    let columns = pop.column_names();

    let mut rng = ChaCha8Rng::seed_from_u64(pop.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let mut rows = Vec::with_capacity(pop.n);
    for _ in 0..pop.n {
        let zeta = DVector::from_iterator(k, psi_sd.iter().map(|s| s * normal()));
        let xi = &st.transfer * zeta;
        let mut row = Vec::with_capacity(columns.len());
        for (c, construct) in pop.constructs.iter().enumerate() {
            let z = xi[c] / st.sd[c];
            match &construct.measurement {
                Measurement::Reflective { loadings } => {
                    row.extend(loadings.iter().map(|l| Some(l * z + (1.0 - l * l).sqrt() * normal())));
                }
                Measurement::Binary { loadings, thresholds } => {
                    for (j, l) in loadings.iter().enumerate() {
                        let cut = thresholds.as_ref().map_or(0.0, |t| t[j]);
                        let v = l * z + (1.0 - l * l).sqrt() * normal();
                        row.push(Some(if v > cut { 1.0 } else { 0.0 }));
                    }
                }
                Measurement::Formative { weights } => {
                    let e = DVector::from_fn(weights.len(), |_, _| normal());
                    let noise = roots[c].as_ref().expect("formative root") * e;
                    row.extend(weights.iter().zip(noise.iter()).map(|(w, u)| Some(w * z + u)));
                }
                Measurement::SingleItem => row.push(Some(z)),
            }
        }
        rows.push(row);
    }
    let table = RawTable::new(columns.clone(), rows).map_err(|e| SimError::Invalid(e.to_string()))?;

    let standardized = DMatrix::from_fn(k, k, |s, t| b[(s, t)] * st.sd[s] / st.sd[t]);
    let truth = Truth {
        generator,
        constructs: pop.constructs.iter().map(|c| c.name.clone()).collect(),
        columns,
        measurement: pop.constructs.iter().map(|c| c.measurement.clone()).collect(),
        structural: rows_of(&b),
        standardized_structural: rows_of(&standardized),
        disturbance_variances: st.psi,
        construct_correlation: rows_of(&st.correlation),
        n: pop.n,
        seed: pop.seed,
    };
    Ok((table, truth))
}

/// Population correlation matrix of the constructs.
pub fn construct_correlation(pop: &PopulationSpec) -> Result<DMatrix<f64>, SimError> {
    pop.check()?;
    let b = pop.structural_matrix()?;
    Ok(structure(pop, &b)?.correlation)
}

/// Recursive generation; requires an acyclic structural graph.
pub fn gen_acyclic(pop: &PopulationSpec) -> Result<(RawTable, Truth), SimError> {
    generate(pop, Generator::Acyclic)
}

/// Equilibrium generation; requires spectral radius of B below one.
pub fn gen_cyclic_equilibrium(pop: &PopulationSpec) -> Result<(RawTable, Truth), SimError> {
    generate(pop, Generator::CyclicEquilibrium)
}

/// Dispatch on `pop.generator`, inferring it from the graph when absent.
pub fn simulate(pop: &PopulationSpec) -> Result<(RawTable, Truth), SimError> {
    let generator = match pop.generator {
        Some(g) => g,
        None if is_acyclic(&pop.structural_matrix()?) => Generator::Acyclic,
        None => Generator::CyclicEquilibrium,
    };
    generate(pop, generator)
}

pub fn write_csv<W: Write>(table: &RawTable, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

/// Write `table` as CSV and `truth` as pretty JSON next to it.
pub fn write_outputs(table: &RawTable, truth: &Truth, csv_path: &Path, truth_path: &Path) -> Result<(), SimError> {
    write_csv(table, File::create(csv_path)?)?;
    let mut f = File::create(truth_path)?;
    serde_json::to_writer_pretty(&mut f, truth)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> PopulationSpec {
        PopulationSpec::from_json(&format!(
            r#"{{
                "constructs": [
                    {{"name": "A", "measurement": {{"kind": "single-item"}}}},
                    {{"name": "B", "measurement": {{"kind": "reflective", "loadings": [0.8, 0.7]}}}},
                    {{"name": "C", "measurement": {{"kind": "single-item"}}}}
                ],
                "paths": [
                    {{"source": "A", "target": "B", "coefficient": 0.5}},
                    {{"source": "B", "target": "C", "coefficient": 0.6}}
                ],
                "n": {n},
                "seed": 3
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn column_naming() {
        assert_eq!(chain(10).column_names(), ["A", "B_1", "B_2", "C"]);
    }

    #[test]
    fn solved_disturbances_give_unit_variance() {
        let (_, truth) = gen_acyclic(&chain(10)).unwrap();
        assert!((truth.disturbance_variances[0] - 1.0).abs() < 1e-12);
        assert!((truth.disturbance_variances[1] - 0.75).abs() < 1e-12);
        assert!((truth.disturbance_variances[2] - 0.64).abs() < 1e-12);
        assert!((truth.construct_correlation[0][2] - 0.3).abs() < 1e-12);
        assert_eq!(truth.standardized_structural, truth.structural);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = gen_acyclic(&chain(50)).unwrap().0;
        let b = gen_acyclic(&chain(50)).unwrap().0;
        assert_eq!(a, b);
        let mut other = chain(50);
        other.seed = 4;
        assert_ne!(a, gen_acyclic(&other).unwrap().0);
    }

    #[test]
    fn divergent_loop_rejected() {
        let mut pop = chain(10);
        pop.paths.push(PopulationPath {
            source: "C".into(),
            target: "A".into(),
            coefficient: 1.0 / 0.3,
        });
        assert!(matches!(gen_acyclic(&pop), Err(SimError::NotAcyclic)));
        assert!(matches!(gen_cyclic_equilibrium(&pop), Err(SimError::NoEquilibrium(r)) if (r - 1.0).abs() < 1e-9));
    }

    #[test]
    fn too_large_loading_rejected() {
        let mut pop = chain(10);
        pop.constructs[1].measurement = Measurement::Reflective { loadings: vec![1.0] };
        assert!(matches!(simulate(&pop), Err(SimError::Invalid(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = PopulationSpec::from_json(r#"{"constructs": [], "n": 3, "sede": 1}"#);
        assert!(matches!(err, Err(SimError::Json(_))));
    }

    #[test]
    fn formative_root_reproduces_residual_covariance() {
        let w = [0.5, 0.4, 0.3];
        let l = formative_loading_root(&w);
        let wv = DVector::from_column_slice(&w);
        let target = DMatrix::identity(3, 3) - &wv * wv.transpose();
        assert!((&l * l.transpose() - target).abs().max() < 1e-12);
    }

    #[test]
    fn csv_roundtrips_through_loader() {
        let (table, _) = gen_acyclic(&chain(20)).unwrap();
        let mut buf = Vec::new();
        write_csv(&table, &mut buf).unwrap();
        let back = crate::dataset::parse_table(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }
}
