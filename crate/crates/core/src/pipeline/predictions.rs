use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataio::{Side, SurvivalRecord};
use crate::error::{Result, SurvError};
use crate::survcore::{time_to_event_from_curve, SurvivalCurve, TimePrediction};

/// One knee's prediction: risk score, survival at years `1..=H`, and the
/// threshold readout.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub subject_id: String,
    pub side: Side,
    pub risk: f64,
    pub survival: Vec<f64>,
    pub predicted: TimePrediction,
}

impl PredictionRow {
    pub fn key(&self) -> String {
        format!("{}:{}", self.subject_id, self.side)
    }

    /// Curve on `0, 1, ..., H` with `S(0) = 1`.
    pub fn curve(&self) -> Result<SurvivalCurve> {
        let grid = (0..=self.survival.len()).map(|y| y as f64).collect();
        let mut values = Vec::with_capacity(self.survival.len() + 1);
        values.push(1.0);
        values.extend_from_slice(&self.survival);
        SurvivalCurve::new(grid, values)
    }
}

/// Builds a row from a curve on `0..=H`, reading the year off at
/// `threshold`.
pub fn prediction_row(
    record: &SurvivalRecord,
    risk: f64,
    curve: &SurvivalCurve,
    threshold: f64,
) -> PredictionRow {
    PredictionRow {
        subject_id: record.subject_id.clone(),
        side: record.side,
        risk,
        survival: curve.values()[1..].to_vec(),
        predicted: time_to_event_from_curve(curve, threshold),
    }
}

/// Predictions that know the observed outcome: survival drops from 1 to 0
/// at each event time and stays at 1 for censored knees; risk is the
/// negated time.
pub fn oracle_predictions(
    records: &[SurvivalRecord],
    horizon_years: usize,
    threshold: f64,
) -> Result<Vec<PredictionRow>> {
    let grid: Vec<f64> = (0..=horizon_years).map(|y| y as f64).collect();
    records
        .iter()
        .map(|r| {
            let values = grid
                .iter()
                .map(|&t| if r.event && t >= r.time { 0.0 } else { 1.0 })
                .collect();
            let curve = SurvivalCurve::new(grid.clone(), values)?;
            Ok(prediction_row(r, -r.time, &curve, threshold))
        })
        .collect()
}

pub fn write_predictions_to<W: Write>(
    mut out: W,
    rows: &[PredictionRow],
    horizon_years: usize,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(|e| SurvError::io("<output>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["subject_id".to_string(), "side".into(), "risk".into()];
    header.extend((1..=horizon_years).map(|y| format!("S_{y}")));
    header.push("predicted".into());
    w.write_record(&header)?;
    for r in rows {
        if r.survival.len() != horizon_years {
            return Err(SurvError::LengthMismatch {
                expected: horizon_years,
                found: r.survival.len(),
            });
        }
        let mut fields = vec![r.subject_id.clone(), r.side.to_string(), r.risk.to_string()];
        fields.extend(r.survival.iter().map(f64::to_string));
        fields.push(r.predicted.to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| SurvError::io("<output>", e))?;
    Ok(())
}

pub fn write_predictions(
    path: impl AsRef<Path>,
    rows: &[PredictionRow],
    horizon_years: usize,
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SurvError::io(path, e))?;
    write_predictions_to(BufWriter::new(file), rows, horizon_years, comment)
}

pub fn read_predictions_from<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let years = header.iter().filter(|h| h.starts_with("S_")).count();
    let mut expected = vec!["subject_id".to_string(), "side".into(), "risk".into()];
    expected.extend((1..=years).map(|y| format!("S_{y}")));
    expected.push("predicted".into());
    if header != expected {
        return Err(SurvError::Schema(format!(
            "predictions header must be `{}`",
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| SurvError::Parse {
            row,
            message: e.to_string(),
        })?;
        let err = |message: String| SurvError::Parse { row, message };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{s}` is not a finite number")))
        };
        let survival = (0..years).map(|k| num(&rec[3 + k])).collect::<Result<Vec<_>>>()?;
        rows.push(PredictionRow {
            subject_id: rec[0].to_string(),
            side: rec[1].parse().map_err(err)?,
            risk: num(&rec[2])?,
            survival,
            predicted: rec[3 + years].parse().map_err(err)?,
        });
    }
    Ok(rows)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SurvError::io(path, e))?;
    read_predictions_from(BufReader::new(file))
}

/// Reorders `rows` to follow `records`. Every record needs exactly one row
/// and every row a record; all offenders are listed otherwise.
pub fn align_predictions(
    rows: Vec<PredictionRow>,
    records: &[SurvivalRecord],
) -> Result<Vec<PredictionRow>> {
    use std::collections::BTreeMap;
    let mut by_key: BTreeMap<String, PredictionRow> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for r in rows {
        let key = r.key();
        if by_key.insert(key.clone(), r).is_some() {
            unmatched.push(format!("{key} (duplicate prediction)"));
        }
    }
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        match by_key.remove(&rec.key()) {
            Some(r) => out.push(r),
            None => unmatched.push(format!("{} (no prediction)", rec.key())),
        }
    }
    unmatched.extend(by_key.into_keys().map(|k| format!("{k} (no record)")));
    if !unmatched.is_empty() {
        return Err(SurvError::UnmatchedKeys(unmatched));
    }
    Ok(out)
}
