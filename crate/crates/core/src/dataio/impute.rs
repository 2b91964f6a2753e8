use std::collections::BTreeMap;

use super::{Cell, ColumnKind, FeatureTable};
use crate::error::{Result, SurvError};

/// Fills missing cells: quantitative columns with the mean of observed
/// values, categorical columns with the observed mode. Mode ties go to the
/// lexicographically smallest label.
pub fn impute(table: &FeatureTable) -> Result<FeatureTable> {
    let mut out = table.clone();
    for (col, kind) in table.column_kinds().iter().enumerate() {
        let fill = match kind {
            ColumnKind::Quantitative => {
                let (sum, count) = table
                    .column(col)
                    .flatten()
                    .filter_map(Cell::as_num)
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                (count > 0).then(|| Cell::Num(sum / count as f64))
            }
            ColumnKind::Categorical => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for label in table.column(col).flatten().filter_map(Cell::as_label) {
                    *counts.entry(label).or_default() += 1;
                }
                // BTreeMap iterates in label order, so the first maximum wins ties.
                let mut best: Option<(&str, usize)> = None;
                for (label, n) in counts {
                    if best.is_none_or(|(_, m)| n > m) {
                        best = Some((label, n));
                    }
                }
                best.map(|(l, _)| Cell::Label(l.to_string()))
            }
        };
        let fill = fill.ok_or_else(|| SurvError::AllMissing(table.column_names()[col].clone()))?;
        for row in 0..table.n_rows() {
            if table.get(row, col).is_none() {
                out.set(row, col, fill.clone());
            }
        }
    }
    Ok(out)
}
