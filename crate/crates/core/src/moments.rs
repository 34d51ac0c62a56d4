//! Cross-moment helpers. Every sum over observations goes through
//! [`ExactSum`], whose result is the correctly rounded value of the exact sum
//! and therefore does not depend on the order of the rows.

use nalgebra::{DMatrix, DVector};

/// Shewchuk-style accumulator of non-overlapping partials.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Correctly rounded total.
    pub fn total(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: look one partial further to decide the rounding
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

pub fn mean(values: &[f64]) -> f64 {
    exact_sum(values.iter().copied()) / values.len() as f64
}

/// Variance with divisor N.
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    exact_sum(values.iter().map(|v| (v - m) * (v - m))) / values.len() as f64
}

/// Pearson correlation; `NaN` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let (mx, my) = (mean(x), mean(y));
    let sxy = exact_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = exact_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = exact_sum(y.iter().map(|b| (b - my) * (b - my)));
    sxy / (sxx * syy).sqrt()
}

pub fn pearson_columns(m: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    pearson(m.column(a).as_slice(), m.column(b).as_slice())
}

/// Correlation matrix of the columns of `data` (centered, divisor N).
/// Columns with zero variance yield `NaN` entries.
pub fn correlation_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let p = data.ncols();
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = data.column(j);
            let m = mean(col.as_slice());
            col.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut cov = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let s = exact_sum(centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y));
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let mut corr = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            corr[(a, b)] = if a == b {
                1.0
            } else {
                cov[(a, b)] / (sd[a] * sd[b])
            };
        }
        if sd[a] == 0.0 {
            for b in 0..p {
                corr[(a, b)] = f64::NAN;
                corr[(b, a)] = f64::NAN;
            }
        }
    }
    corr
}

/// z-scores with divisor N; `None` when the column is constant.
pub fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let m = mean(values);
    let sd = population_variance(values).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return None;
    }
    Some(values.iter().map(|v| (v - m) / sd).collect())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solve `a x = b` for symmetric positive definite `a`; `None` if the
/// smallest eigenvalue is below `tol`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    if !(min_eigenvalue(a) > tol) {
        return None;
    }
    let chol = a.clone().cholesky()?;
    Some(chol.solve(b))
}
