use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Cell, ColumnKind, FeatureTable, Side, SurvivalRecord};
use crate::error::{Result, SurvError};

pub const REQUIRED_COLUMNS: [&str; 4] = ["subject_id", "side", "time", "event"];

/// Column-kind declaration read from a `name = kind` sidecar file.
///
/// A `* = kind` line sets the kind for covariates not listed explicitly;
/// without it every covariate must be declared.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub kinds: BTreeMap<String, ColumnKind>,
    pub default: Option<ColumnKind>,
}

impl Schema {
    /// Every covariate is quantitative.
    pub fn all_quantitative() -> Self {
        Schema {
            kinds: BTreeMap::new(),
            default: Some(ColumnKind::Quantitative),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    SurvError::Schema(format!("line {}: expected `name = kind`", lineno + 1))
                })?;
            let kind: ColumnKind = value
                .parse()
                .map_err(|e| SurvError::Schema(format!("line {}: {e}", lineno + 1)))?;
            let key = key.trim();
            if key == "*" {
                schema.default = Some(kind);
            } else if schema.kinds.insert(key.to_string(), kind).is_some() {
                return Err(SurvError::Schema(format!(
                    "line {}: column `{key}` declared twice",
                    lineno + 1
                )));
            }
        }
        Ok(schema)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SurvError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn from_table(table: &FeatureTable) -> Self {
        Schema {
            kinds: table
                .column_names()
                .iter()
                .cloned()
                .zip(table.column_kinds().iter().copied())
                .collect(),
            default: None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(d) = self.default {
            out.push_str(&format!("* = {d}\n"));
        }
        for (name, kind) in &self.kinds {
            out.push_str(&format!("{name} = {kind}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| SurvError::io(path, e))
    }

    fn kind_of(&self, column: &str) -> Option<ColumnKind> {
        self.kinds.get(column).copied().or(self.default)
    }
}

/// Reads a dataset CSV: `subject_id, side, time, event (0/1)` plus
/// covariates. Empty fields are missing cells. Lines starting with `#` are
/// comments. Row numbers in errors count data rows from 1.
pub fn read_dataset<R: Read>(
    reader: R,
    schema: &Schema,
) -> Result<(FeatureTable, Vec<SurvivalRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let mut required = [0usize; 4];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SurvError::MissingColumns(vec![name.to_string()]))?;
    }
    let covariate_idx: Vec<usize> = (0..header.len())
        .filter(|i| !required.contains(i))
        .collect();
    let names: Vec<String> = covariate_idx.iter().map(|&i| header[i].clone()).collect();

    let mut kinds = Vec::with_capacity(names.len());
    let mut undeclared = Vec::new();
    for name in &names {
        match schema.kind_of(name) {
            Some(k) => kinds.push(k),
            None => undeclared.push(name.clone()),
        }
    }
    if !undeclared.is_empty() {
        return Err(SurvError::Schema(format!(
            "covariates without a declared kind: {}",
            undeclared.join(", ")
        )));
    }
    let present: HashSet<&str> = names.iter().map(String::as_str).collect();
    let absent: Vec<String> = schema
        .kinds
        .keys()
        .filter(|k| !present.contains(k.as_str()))
        .cloned()
        .collect();
    if !absent.is_empty() {
        return Err(SurvError::MissingColumns(absent));
    }

    let [sid_i, side_i, time_i, event_i] = required;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (n, result) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = result.map_err(|e| SurvError::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(SurvError::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let parse_err = |message: String| SurvError::Parse { row, message };

        let subject_id = rec[sid_i].to_string();
        if subject_id.is_empty() {
            return Err(parse_err("empty subject_id".into()));
        }
        let side: Side = rec[side_i].parse().map_err(parse_err)?;
        let time: f64 = rec[time_i]
            .parse()
            .map_err(|_| parse_err(format!("time `{}` is not a number", &rec[time_i])))?;
        if !time.is_finite() || time < 0.0 {
            return Err(SurvError::InvalidRow {
                row,
                message: format!("time must be nonnegative, got {time}"),
            });
        }
        let event = match &rec[event_i] {
            "1" | "true" | "TRUE" => true,
            "0" | "false" | "FALSE" => false,
            other => return Err(parse_err(format!("event `{other}` is not 0 or 1"))),
        };
        if !seen.insert((subject_id.clone(), side)) {
            return Err(SurvError::InvalidRow {
                row,
                message: format!("duplicate knee {subject_id}:{side}"),
            });
        }

        let mut cells = Vec::with_capacity(names.len());
        for (&ci, (name, kind)) in covariate_idx.iter().zip(names.iter().zip(&kinds)) {
            let field = &rec[ci];
            if field.is_empty() {
                cells.push(None);
                continue;
            }
            cells.push(Some(match kind {
                ColumnKind::Quantitative => {
                    let v: f64 = field.parse().map_err(|_| {
                        parse_err(format!("column `{name}`: `{field}` is not a number"))
                    })?;
                    if !v.is_finite() {
                        return Err(parse_err(format!("column `{name}`: non-finite value")));
                    }
                    Cell::Num(v)
                }
                ColumnKind::Categorical => Cell::Label(field.to_string()),
            }));
        }
        records.push(SurvivalRecord {
            subject_id,
            side,
            time,
            event,
        });
        rows.push(cells);
    }
    let table = FeatureTable::new(names, kinds, rows)?;
    Ok((table, records))
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &Schema,
) -> Result<(FeatureTable, Vec<SurvivalRecord>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SurvError::io(path, e))?;
    read_dataset(BufReader::new(file), schema)
}

/// Writes the dataset in the same dialect `read_dataset` accepts. An
/// optional `comment` is emitted as a leading `# ...` line.
pub fn write_dataset_to<W: Write>(
    mut out: W,
    table: &FeatureTable,
    records: &[SurvivalRecord],
    comment: Option<&str>,
) -> Result<()> {
    if table.n_rows() != records.len() {
        return Err(SurvError::RowMismatch {
            expected: records.len(),
            found: table.n_rows(),
        });
    }
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(|e| SurvError::io("<output>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(table.column_names().iter().map(String::as_str));
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for (i, r) in records.iter().enumerate() {
        fields.clear();
        fields.push(r.subject_id.clone());
        fields.push(r.side.to_string());
        fields.push(r.time.to_string());
        fields.push(if r.event { "1" } else { "0" }.to_string());
        fields.extend(
            table
                .row(i)
                .iter()
                .map(|c| c.as_ref().map(Cell::to_string).unwrap_or_default()),
        );
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| SurvError::io("<output>", e))?;
    Ok(())
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    table: &FeatureTable,
    records: &[SurvivalRecord],
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SurvError::io(path, e))?;
    write_dataset_to(BufWriter::new(file), table, records, comment)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "age = quantitative\nkl = categorical\n";

    #[test]
    fn three_rows_with_missing_cells() {
        let csv = "subject_id,side,time,event,age,kl\n\
                   S1,left,3.5,1,61,2\n\
                   S1,right,9,0,,3\n\
                   S2,left,4,1,70,\n";
        let schema = Schema::parse(SCHEMA).unwrap();
        let (table, recs) = read_dataset(csv.as_bytes(), &schema).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(recs.len(), 3);
        assert_eq!(table.missing_count(), 2);
        assert!(table.get(1, 0).is_none());
        assert!(table.get(2, 1).is_none());
        assert_eq!(table.get(0, 1), Some(&Cell::Label("2".into())));
        assert_eq!(recs[1], SurvivalRecord::new("S1", Side::Right, 9.0, false));
    }

    #[test]
    fn negative_time_cites_row() {
        let csv = "subject_id,side,time,event,age,kl\n\
                   S1,left,3.5,1,61,2\n\
                   S2,left,-1,1,70,1\n";
        let schema = Schema::parse(SCHEMA).unwrap();
        let err = read_dataset(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, SurvError::InvalidRow { row: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_row_is_a_parse_error() {
        let csv = "subject_id,side,time,event,age,kl\n\
                   S1,left,3.5,1,61,2\n\
                   S2,left,2.0,1,70\n";
        let schema = Schema::parse(SCHEMA).unwrap();
        let err = read_dataset(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, SurvError::Parse { row: 2, .. }), "{err}");

        let bad_num = "subject_id,side,time,event,age,kl\nS1,left,1,1,abc,2\n";
        let err = read_dataset(bad_num.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, SurvError::Parse { row: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_knee_is_a_validation_error() {
        let csv = "subject_id,side,time,event,age,kl\n\
                   S1,left,3.5,1,61,2\n\
                   S1,left,2.0,1,70,1\n";
        let schema = Schema::parse(SCHEMA).unwrap();
        let err = read_dataset(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, SurvError::InvalidRow { row: 2, .. }), "{err}");
    }

    #[test]
    fn header_must_match_schema() {
        let csv = "subject_id,side,time,event,age\nS1,left,1,1,2\n";
        let schema = Schema::parse(SCHEMA).unwrap();
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema),
            Err(SurvError::MissingColumns(c)) if c == vec!["kl".to_string()]
        ));
        let csv = "subject_id,side,time,event,age,kl,extra\nS1,left,1,1,2,1,5\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema),
            Err(SurvError::Schema(_))
        ));
        let csv = "subject_id,side,event,age,kl\nS1,left,1,2,1\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema),
            Err(SurvError::MissingColumns(c)) if c == vec!["time".to_string()]
        ));
    }

    #[test]
    fn wide_file_loads_without_loss() {
        let n_rows = 1681;
        let n_cols = 1545;
        let mut csv = String::from("subject_id,side,time,event");
        for j in 0..n_cols {
            csv.push_str(&format!(",f{j}"));
        }
        csv.push('\n');
        for i in 0..n_rows {
            let side = if i % 2 == 0 { "left" } else { "right" };
            csv.push_str(&format!("P{},{side},{},{}", i / 2, (i % 10) as f64 * 0.9, i % 2));
            for j in 0..n_cols {
                if (i + j) % 97 == 0 {
                    csv.push(',');
                } else {
                    csv.push_str(&format!(",{}", (i * n_cols + j) as f64 / 7.0));
                }
            }
            csv.push('\n');
        }
        let (table, recs) = read_dataset(csv.as_bytes(), &Schema::all_quantitative()).unwrap();
        assert_eq!(table.n_rows(), n_rows);
        assert_eq!(table.n_cols(), n_cols);
        assert_eq!(recs.len(), n_rows);
        let expected_missing = (0..n_rows)
            .flat_map(|i| (0..n_cols).map(move |j| (i + j) % 97 == 0))
            .filter(|&m| m)
            .count();
        assert_eq!(table.missing_count(), expected_missing);
        assert_eq!(
            table.get(5, 3).and_then(Cell::as_num),
            Some((5 * n_cols + 3) as f64 / 7.0)
        );

        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &table, &recs, Some("seed=1")).unwrap();
        let (table2, recs2) = read_dataset(buf.as_slice(), &Schema::all_quantitative()).unwrap();
        assert_eq!(table, table2);
        assert_eq!(recs, recs2);
    }

    #[test]
    fn schema_text_round_trip() {
        let s = Schema::parse("# kinds\n* = quantitative\nsex: categorical\n").unwrap();
        assert_eq!(s.default, Some(ColumnKind::Quantitative));
        assert_eq!(s.kinds["sex"], ColumnKind::Categorical);
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
        assert!(Schema::parse("a = banana").is_err());
    }
}
