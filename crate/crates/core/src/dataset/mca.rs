//! Correspondence analysis of the indicator (disjunctive) matrix of a block
//! of binary items, reduced to its first dimension.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::moments;

/// Relative gap below which leading principal inertias count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum McaError {
    #[error("empty block")]
    Empty,
    #[error("entry {value} at row {row}, variable {variable} is not 0 or 1")]
    NotBinary {
        row: usize,
        variable: usize,
        value: f64,
    },
    #[error("variable {0} has a single observed category")]
    SingleCategory(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McaResult {
    /// Standard row coordinates on the first dimension (mean 0, variance 1
    /// under uniform row masses), oriented to correlate positively with the
    /// number of "1" answers.
    pub scores: Vec<f64>,
    /// Principal inertias of every dimension of the indicator matrix, in
    /// decreasing order (trivial dimensions included as zeros).
    pub principal_inertias: Vec<f64>,
}

impl McaResult {
    pub fn total_inertia(&self) -> f64 {
        self.principal_inertias.iter().sum()
    }

    pub fn inertia_shares(&self) -> Vec<f64> {
        let total = self.total_inertia();
        self.principal_inertias.iter().map(|l| l / total).collect()
    }

    /// Raw (unadjusted) share of the first principal inertia.
    pub fn first_share(&self) -> f64 {
        self.principal_inertias[0] / self.total_inertia()
    }
}

/// Standardized residual matrix `D_r^{-1/2} (P - r c') D_c^{-1/2}` of the
/// disjunctive coding of `block` (two columns per binary variable).
pub(crate) fn standardized_residuals(block: &DMatrix<f64>) -> Result<DMatrix<f64>, McaError> {
    let (n, q) = block.shape();
    if n == 0 || q == 0 {
        return Err(McaError::Empty);
    }
    for j in 0..q {
        for i in 0..n {
            let v = block[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(McaError::NotBinary {
                    row: i,
                    variable: j,
                    value: v,
                });
            }
        }
    }
    let total = (n * q) as f64;
    let mut s = DMatrix::zeros(n, 2 * q);
    for j in 0..q {
        let ones = block.column(j).iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == n {
            return Err(McaError::SingleCategory(j));
        }
        for (cat, count) in [(0.0, n - ones), (1.0, ones)] {
            let col = 2 * j + usize::from(cat == 1.0);
            let c = count as f64 / total;
            let scale = (c / n as f64).sqrt();
            for i in 0..n {
                let z = if block[(i, j)] == cat { 1.0 } else { 0.0 };
                s[(i, col)] = (z / total - c / n as f64) / scale;
            }
        }
    }
    Ok(s)
}

/// Among orthonormal directions spanning a tied leading eigenspace, pick the
/// unit vector closest to `target`; falls back to the first direction.
pub(crate) fn align_in_span(directions: &[DVector<f64>], target: &DVector<f64>) -> DVector<f64> {
    let mut u = DVector::zeros(target.len());
    for d in directions {
        u += d * d.dot(target);
    }
    let norm = u.norm();
    if directions.len() == 1 || !(norm > 1e-12) {
        return directions[0].clone();
    }
    u / norm
}

/// Row sums centered and weighted by the square root of the uniform row mass.
pub(crate) fn row_sum_direction(block: &DMatrix<f64>) -> DVector<f64> {
    let n = block.nrows();
    let sums: Vec<f64> = (0..n).map(|i| block.row(i).sum()).collect();
    let m = moments::mean(&sums);
    DVector::from_iterator(n, sums.iter().map(|s| (s - m) / (n as f64).sqrt()))
}

pub(crate) fn orient_to_row_sums(scores: &mut [f64], block: &DMatrix<f64>) {
    let sums: Vec<f64> = (0..block.nrows()).map(|i| block.row(i).sum()).collect();
    if moments::pearson(scores, &sums) < 0.0 {
        scores.iter_mut().for_each(|v| *v = -*v);
    }
}

/// First-dimension MCA of an N x q binary block.
///
/// The eigenproblem is solved on the small `2q x 2q` cross-product of the
/// standardized residuals; row coordinates follow by the transition formula.
/// When the leading principal inertias tie, the first dimension is the
/// direction of the tied eigenspace most aligned with the row sums.
pub fn mca_first_dimension(block: &DMatrix<f64>) -> Result<McaResult, McaError> {
    let s = standardized_residuals(block)?;
    let n = block.nrows();
    let eig = (s.transpose() * &s).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let inertias: Vec<f64> = order
        .iter()
        .map(|&k| eig.eigenvalues[k].max(0.0))
        .collect();

    let lead = inertias[0];
    let tied: Vec<DVector<f64>> = order
        .iter()
        .zip(&inertias)
        .take_while(|(_, &l)| l >= lead * (1.0 - TIE_TOLERANCE))
        .map(|(&k, &l)| (&s * eig.eigenvectors.column(k)) / l.sqrt())
        .collect();
    let u = align_in_span(&tied, &row_sum_direction(block));

    let root_n = (n as f64).sqrt();
    let mut scores: Vec<f64> = u.iter().map(|v| v * root_n).collect();
    orient_to_row_sums(&mut scores, block);
    Ok(McaResult {
        scores,
        principal_inertias: inertias,
    })
}
