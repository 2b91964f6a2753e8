//! Dense numeric design matrices and the categorical encoding that
//! produces them from imputed feature tables.

use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, ColumnKind, FeatureTable};
use crate::error::{Result, SurvError};

/// Row-major dense matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(SurvError::LengthMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        if names.len() != n_cols {
            return Err(SurvError::LengthMismatch {
                expected: n_cols,
                found: names.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SurvError::NonFinite(format!(
                "row {} column `{}`",
                i / n_cols.max(1) + 1,
                names[i % n_cols.max(1)]
            )));
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
            names,
        })
    }

    /// Builds from row vectors; columns are named `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(SurvError::LengthMismatch {
                expected: n_cols,
                found: bad.len(),
            });
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        Self::new(rows.len(), n_cols, rows.concat(), names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
            names: self.names.clone(),
        }
    }

    /// Indices of the named columns, or the list of names that are absent.
    pub fn column_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(names.len());
        let mut missing = Vec::new();
        for n in names {
            match self.names.iter().position(|m| m == n) {
                Some(i) => idx.push(i),
                None => missing.push(n.clone()),
            }
        }
        if missing.is_empty() {
            Ok(idx)
        } else {
            Err(SurvError::MissingColumns(missing))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum EncodedColumn {
    Quantitative { name: String },
    /// Dummy coding: one indicator per level after the first (reference).
    Categorical { name: String, levels: Vec<String> },
}

/// Maps an imputed [`FeatureTable`] onto numeric columns. Categorical
/// columns become 0/1 indicators for each non-reference level; levels are
/// sorted, the first is the reference, and unseen levels encode as all
/// zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEncoder {
    columns: Vec<EncodedColumn>,
}

impl DesignEncoder {
    pub fn fit(table: &FeatureTable) -> Self {
        let columns = table
            .column_names()
            .iter()
            .zip(table.column_kinds())
            .enumerate()
            .map(|(j, (name, kind))| match kind {
                ColumnKind::Quantitative => EncodedColumn::Quantitative { name: name.clone() },
                ColumnKind::Categorical => {
                    let mut levels: Vec<String> = table
                        .column(j)
                        .flatten()
                        .filter_map(Cell::as_label)
                        .map(str::to_string)
                        .collect();
                    levels.sort();
                    levels.dedup();
                    EncodedColumn::Categorical {
                        name: name.clone(),
                        levels,
                    }
                }
            })
            .collect();
        DesignEncoder { columns }
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c {
                EncodedColumn::Quantitative { name } => out.push(name.clone()),
                EncodedColumn::Categorical { name, levels } => {
                    out.extend(levels.iter().skip(1).map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    pub fn input_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| match c {
                EncodedColumn::Quantitative { name } | EncodedColumn::Categorical { name, .. } => {
                    name.clone()
                }
            })
            .collect()
    }

    /// Encodes `table`, matching input columns by name. Fails naming every
    /// required column the table lacks, or on any missing cell.
    pub fn encode(&self, table: &FeatureTable) -> Result<Matrix> {
        let mut source = Vec::with_capacity(self.columns.len());
        let mut missing = Vec::new();
        for name in self.input_names() {
            match table.column_index(&name) {
                Some(i) => source.push(i),
                None => missing.push(name),
            }
        }
        if !missing.is_empty() {
            return Err(SurvError::MissingColumns(missing));
        }
        let names = self.output_names();
        let mut data = Vec::with_capacity(table.n_rows() * names.len());
        for r in 0..table.n_rows() {
            for (col, &src) in self.columns.iter().zip(&source) {
                let cell = table.get(r, src).ok_or_else(|| SurvError::InvalidRow {
                    row: r + 1,
                    message: format!(
                        "missing value in column `{}`; impute before encoding",
                        table.column_names()[src]
                    ),
                })?;
                match col {
                    EncodedColumn::Quantitative { name } => {
                        data.push(cell.as_num().ok_or_else(|| SurvError::Parse {
                            row: r + 1,
                            message: format!("column `{name}` is not numeric"),
                        })?);
                    }
                    EncodedColumn::Categorical { levels, .. } => {
                        let label = cell.to_string();
                        data.extend(levels.iter().skip(1).map(|l| f64::from(*l == label)));
                    }
                }
            }
        }
        Matrix::new(table.n_rows(), names.len(), data, names)
    }
}
