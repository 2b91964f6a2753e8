//! Tabular survival datasets: records, covariate tables, CSV ingestion,
//! imputation and subject-level partitioning.

mod impute;
mod io;
mod split;

pub use impute::impute;
pub use io::{
    load_dataset, read_dataset, write_dataset, write_dataset_to, Schema, REQUIRED_COLUMNS,
};
pub use split::{partition_rows, split_subject_level, Partition, SplitAssignment};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

/// Default follow-up horizon in years.
pub const DEFAULT_HORIZON: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Outcome of one knee: follow-up time in years and whether surgery
/// occurred at that time (`event`) or the knee was right-censored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub subject_id: String,
    pub side: Side,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(subject_id: impl Into<String>, side: Side, time: f64, event: bool) -> Self {
        SurvivalRecord {
            subject_id: subject_id.into(),
            side,
            time,
            event,
        }
    }

    /// `subject_id:side`, the unique row key within a dataset.
    pub fn key(&self) -> String {
        format!("{}:{}", self.subject_id, self.side)
    }
}

/// Builds anonymous records from parallel time/event slices. Every record
/// gets its own subject id; handy for estimator-level code and tests.
pub fn records_from(times: &[f64], events: &[bool]) -> Vec<SurvivalRecord> {
    times
        .iter()
        .zip(events)
        .enumerate()
        .map(|(i, (&t, &e))| SurvivalRecord::new(format!("s{i}"), Side::Left, t, e))
        .collect()
}

/// Checks the record invariants: finite, nonnegative times no later than
/// `horizon`, and unique `(subject_id, side)` keys.
pub fn validate_records(records: &[SurvivalRecord], horizon: f64) -> Result<()> {
    let mut seen = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(SurvError::InvalidRow {
                row,
                message: format!("time must be a nonnegative number, got {}", r.time),
            });
        }
        if r.time > horizon {
            return Err(SurvError::InvalidRow {
                row,
                message: format!("time {} exceeds the horizon {horizon}", r.time),
            });
        }
        if !seen.insert((r.subject_id.as_str(), r.side)) {
            return Err(SurvError::InvalidRow {
                row,
                message: format!("duplicate knee {}", r.key()),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Quantitative,
    Categorical,
}

impl FromStr for ColumnKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quantitative" | "numeric" | "q" => Ok(ColumnKind::Quantitative),
            "categorical" | "category" | "c" => Ok(ColumnKind::Categorical),
            other => Err(format!("unknown column kind `{other}`")),
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Quantitative => f.write_str("quantitative"),
            ColumnKind::Categorical => f.write_str("categorical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Label(String),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Cell::Label(s) => Some(s),
            Cell::Num(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Label(s) => f.write_str(s),
        }
    }
}

/// Row-major covariate table with explicit missingness (`None` cells).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    values: Vec<Option<Cell>>,
    n_rows: usize,
}

impl FeatureTable {
    pub fn new(
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        rows: Vec<Vec<Option<Cell>>>,
    ) -> Result<Self> {
        if column_names.len() != column_kinds.len() {
            return Err(SurvError::LengthMismatch {
                expected: column_names.len(),
                found: column_kinds.len(),
            });
        }
        let mut names = HashSet::new();
        for name in &column_names {
            if !names.insert(name.as_str()) {
                return Err(SurvError::Schema(format!("duplicate column `{name}`")));
            }
        }
        let width = column_names.len();
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(SurvError::Parse {
                    row: i + 1,
                    message: format!("expected {width} covariates, found {}", row.len()),
                });
            }
            for (j, cell) in row.iter().enumerate() {
                let ok = match (cell, column_kinds[j]) {
                    (None, _) => true,
                    (Some(Cell::Num(_)), ColumnKind::Quantitative) => true,
                    (Some(Cell::Label(_)), ColumnKind::Categorical) => true,
                    _ => false,
                };
                if !ok {
                    return Err(SurvError::Parse {
                        row: i + 1,
                        message: format!(
                            "cell in column `{}` does not match its {} kind",
                            column_names[j], column_kinds[j]
                        ),
                    });
                }
            }
            values.extend(row);
        }
        Ok(FeatureTable {
            column_names,
            column_kinds,
            values,
            n_rows,
        })
    }

    /// A fully observed all-quantitative table.
    pub fn from_numeric(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let kinds = vec![ColumnKind::Quantitative; column_names.len()];
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| Some(Cell::Num(v))).collect())
            .collect();
        Self::new(column_names, kinds, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&Cell> {
        self.values[row * self.n_cols() + col].as_ref()
    }

    pub fn row(&self, row: usize) -> &[Option<Cell>] {
        let w = self.n_cols();
        &self.values[row * w..(row + 1) * w]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<&Cell>> + '_ {
        let w = self.n_cols();
        (0..self.n_rows).map(move |r| self.values[r * w + col].as_ref())
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureTable {
        let w = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            values.extend_from_slice(&self.values[i * w..(i + 1) * w]);
        }
        FeatureTable {
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            values,
            n_rows: indices.len(),
        }
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, cell: Cell) {
        let w = self.n_cols();
        self.values[row * w + col] = Some(cell);
    }
}

/// Appends the columns of each block left-to-right. Column names are
/// prefixed with `label.` to keep them unique; a single block is returned
/// unchanged.
pub fn concat_features(blocks: &[(&str, &FeatureTable)]) -> Result<FeatureTable> {
    let Some(((_, first), rest)) = blocks.split_first() else {
        return Err(SurvError::Empty("no feature blocks to concatenate"));
    };
    if rest.is_empty() {
        return Ok((*first).clone());
    }
    let n_rows = first.n_rows();
    for (_, block) in rest {
        if block.n_rows() != n_rows {
            return Err(SurvError::RowMismatch {
                expected: n_rows,
                found: block.n_rows(),
            });
        }
    }
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for (label, block) in blocks {
        names.extend(block.column_names().iter().map(|n| format!("{label}.{n}")));
        kinds.extend_from_slice(block.column_kinds());
    }
    let rows = (0..n_rows)
        .map(|r| {
            blocks
                .iter()
                .flat_map(|(_, b)| b.row(r).iter().cloned())
                .collect()
        })
        .collect();
    FeatureTable::new(names, kinds, rows)
}
