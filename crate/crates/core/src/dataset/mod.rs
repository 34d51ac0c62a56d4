//! Tabular survey data: loading, missing-data handling, standardization and
//! collapsing of binary blocks into an MCA intensity column.

mod mca;

pub use mca::{mca_first_dimension, McaError, McaResult};

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modelspec::{Mode, ModelSpec};
use crate::moments;

/// Rows retained after missing-data handling must reach this count.
pub const MIN_EFFECTIVE_ROWS: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell `{value}` at line {line}, column `{column}`")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("table needs at least 2 data rows, found {0}")]
    TooFewRecords(usize),
    #[error("column `{0}` required by the model is absent from the data")]
    MissingColumn(String),
    #[error("zero variance in column `{0}` after missing-data handling")]
    ZeroVariance(String),
    #[error("only {0} rows remain after missing-data handling (need at least {MIN_EFFECTIVE_ROWS})")]
    TooFewRows(usize),
    #[error("MCA block `{block}`: {source}")]
    Mca {
        block: String,
        #[source]
        source: McaError,
    },
}

/// Parsed CSV; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl RawTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for name in &header {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(DataError::RaggedRow {
                    line: i as u64 + 2,
                    expected: header.len(),
                    found: row.len(),
                });
            }
        }
        if rows.len() < 2 {
            return Err(DataError::TooFewRecords(rows.len()));
        }
        Ok(Self { header, rows })
    }

    /// Complete table from column-major values.
    pub fn from_columns(header: Vec<String>, columns: &[Vec<f64>]) -> Result<Self, DataError> {
        let n = columns.first().map_or(0, Vec::len);
        let rows = (0..n)
            .map(|i| columns.iter().map(|c| Some(c[i])).collect())
            .collect();
        Self::new(header, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.header.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn load_table(path: impl AsRef<Path>) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(file)
}

pub fn parse_table<R: Read>(reader: R) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| parse_cell(cell).ok_or_else(|| DataError::NonNumeric {
                line,
                column: header[j].clone(),
                value: cell.to_string(),
            }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    RawTable::new(header, rows)
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    if cell.is_empty() || cell == "NA" {
        return Some(None);
    }
    let v: f64 = cell.parse().ok()?;
    v.is_finite().then_some(Some(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Listwise,
    MeanImpute,
}

/// Column range of one construct inside [`PreparedData::matrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockColumns {
    pub name: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McaSummary {
    pub construct: String,
    pub variables: Vec<String>,
    pub principal_inertias: Vec<f64>,
    pub inertia_shares: Vec<f64>,
}

/// Standardized indicator matrix partitioned into construct blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub matrix: DMatrix<f64>,
    pub columns: Vec<String>,
    pub blocks: Vec<BlockColumns>,
    pub n_total: usize,
    pub n_effective: usize,
    /// Missing cells per construct, counted before row deletion.
    pub missing: Vec<(String, usize)>,
    pub mca: Vec<McaSummary>,
}

impl PreparedData {
    pub fn block_range(&self, name: &str) -> Option<Range<usize>> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.range.clone())
    }

    pub fn block_matrix(&self, name: &str) -> Option<DMatrix<f64>> {
        let r = self.block_range(name)?;
        Some(self.matrix.columns(r.start, r.len()).into_owned())
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Build from an already standardized matrix; blocks are given as
    /// (construct, column names) and must cover consecutive columns.
    pub fn from_standardized(
        columns: Vec<String>,
        matrix: DMatrix<f64>,
        blocks: &[(&str, &[&str])],
    ) -> Self {
        let index: HashMap<&str, usize> = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let blocks = blocks
            .iter()
            .map(|(name, cols)| {
                let start = index[cols[0]];
                BlockColumns {
                    name: name.to_string(),
                    range: start..start + cols.len(),
                }
            })
            .collect();
        let n = matrix.nrows();
        Self {
            matrix,
            columns,
            blocks,
            n_total: n,
            n_effective: n,
            missing: Vec::new(),
            mca: Vec::new(),
        }
    }

    /// Appends a standardized copy of `values` and points construct `name`
    /// at it alone (replacing any earlier block of that name).
    pub fn with_single_column_block(
        &self,
        name: &str,
        column: &str,
        values: &[f64],
    ) -> Result<Self, DataError> {
        let z = moments::standardize(values)
            .ok_or_else(|| DataError::ZeroVariance(column.to_string()))?;
        let p = self.matrix.ncols();
        let mut matrix = self.matrix.clone().insert_column(p, 0.0);
        matrix.column_mut(p).copy_from_slice(&z);
        let mut columns = self.columns.clone();
        columns.push(column.to_string());
        let mut blocks: Vec<BlockColumns> =
            self.blocks.iter().filter(|b| b.name != name).cloned().collect();
        blocks.push(BlockColumns {
            name: name.to_string(),
            range: p..p + 1,
        });
        Ok(Self {
            matrix,
            columns,
            blocks,
            ..self.clone()
        })
    }

    /// Row resample (bootstrap): takes rows by index and restandardizes.
    pub fn resample(&self, rows: &[usize]) -> Result<Self, DataError> {
        let n = rows.len();
        let p = self.matrix.ncols();
        let mut matrix = DMatrix::zeros(n, p);
        for j in 0..p {
            let src = self.matrix.column(j);
            let col: Vec<f64> = rows.iter().map(|&i| src[i]).collect();
            let z = moments::standardize(&col)
                .ok_or_else(|| DataError::ZeroVariance(self.columns[j].clone()))?;
            matrix.column_mut(j).copy_from_slice(&z);
        }
        Ok(Self {
            matrix,
            n_total: n,
            n_effective: n,
            ..self.clone()
        })
    }

    /// Same data with rows reordered (`order[i]` is the source row of row i).
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let mut matrix = self.matrix.clone();
        for (i, &src) in order.iter().enumerate() {
            matrix.row_mut(i).copy_from(&self.matrix.row(src));
        }
        Self {
            matrix,
            ..self.clone()
        }
    }
}

/// Apply the missing-data policy, collapse MCA blocks, and standardize every
/// retained column (divisor N).
pub fn prepare_blocks(
    raw: &RawTable,
    spec: &ModelSpec,
    policy: MissingPolicy,
) -> Result<PreparedData, DataError> {
    let lookup = |name: &str| {
        raw.column_index(name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let block_cols: Vec<Vec<usize>> = spec
        .blocks
        .iter()
        .map(|b| b.indicators.iter().map(|i| lookup(i)).collect())
        .collect::<Result<_, _>>()?;

    let missing: Vec<(String, usize)> = spec
        .blocks
        .iter()
        .zip(&block_cols)
        .map(|(b, cols)| {
            let count = raw
                .rows
                .iter()
                .map(|row| cols.iter().filter(|&&c| row[c].is_none()).count())
                .sum();
            (b.name.clone(), count)
        })
        .collect();

    // Columns whose missing cells force row deletion under each policy.
    // Binary MCA items cannot be mean-imputed, so they always delete.
    let strict: Vec<usize> = spec
        .blocks
        .iter()
        .zip(&block_cols)
        .filter(|(b, _)| policy == MissingPolicy::Listwise || b.mode == Mode::McaSingleItem)
        .flat_map(|(_, cols)| cols.iter().copied())
        .collect();
    let kept: Vec<usize> = (0..raw.n_rows())
        .filter(|&i| strict.iter().all(|&c| raw.rows[i][c].is_some()))
        .collect();
    let n = kept.len();
    if n < MIN_EFFECTIVE_ROWS {
        return Err(DataError::TooFewRows(n));
    }

    let raw_column = |c: usize| -> Vec<f64> {
        let observed: Vec<f64> = kept.iter().filter_map(|&i| raw.rows[i][c]).collect();
        let fill = if observed.is_empty() {
            0.0
        } else {
            moments::mean(&observed)
        };
        kept.iter()
            .map(|&i| raw.rows[i][c].unwrap_or(fill))
            .collect()
    };

    let mut columns = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut blocks = Vec::new();
    let mut mca = Vec::new();
    for (block, cols) in spec.blocks.iter().zip(&block_cols) {
        let start = columns.len();
        if block.mode == Mode::McaSingleItem {
            let binary = DMatrix::from_fn(n, cols.len(), |i, j| raw.rows[kept[i]][cols[j]].unwrap());
            let result = mca_first_dimension(&binary).map_err(|source| DataError::Mca {
                block: block.name.clone(),
                source,
            })?;
            let name = format!("{}.mca1", block.name);
            let z = moments::standardize(&result.scores)
                .ok_or_else(|| DataError::ZeroVariance(name.clone()))?;
            mca.push(McaSummary {
                construct: block.name.clone(),
                variables: block.indicators.clone(),
                inertia_shares: result.inertia_shares(),
                principal_inertias: result.principal_inertias,
            });
            columns.push(name);
            values.push(z);
        } else {
            for (&c, name) in cols.iter().zip(&block.indicators) {
                let z = moments::standardize(&raw_column(c))
                    .ok_or_else(|| DataError::ZeroVariance(name.clone()))?;
                columns.push(name.clone());
                values.push(z);
            }
        }
        blocks.push(BlockColumns {
            name: block.name.clone(),
            range: start..columns.len(),
        });
    }

    let matrix = DMatrix::from_fn(n, values.len(), |i, j| values[j][i]);
    Ok(PreparedData {
        matrix,
        columns,
        blocks,
        n_total: raw.n_rows(),
        n_effective: n,
        missing,
        mca,
    })
}
