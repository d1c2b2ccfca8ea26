//! Labeled occurrence records, CSV loading and seeded stratified splitting.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::schema::{FeatureSchema, FeatureVector, FEATURE_COUNT};

/// Occurrence class. `SeriousIncident` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Incident,
    SeriousIncident,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Incident, Label::SeriousIncident];

    pub fn is_positive(self) -> bool {
        self == Label::SeriousIncident
    }

    /// 0 for Incident, 1 for SeriousIncident.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Incident
        } else {
            Label::SeriousIncident
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Incident => "incident",
            Label::SeriousIncident => "serious_incident",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Label::Incident => "Incident",
            Label::SeriousIncident => "Serious Incident",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "incident" => Some(Label::Incident),
            "serious_incident" => Some(Label::SeriousIncident),
            _ => None,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Incident => Label::SeriousIncident,
            Label::SeriousIncident => Label::Incident,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub record_id: String,
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: String,
    pub records: Vec<LabeledRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}, column {column:?}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("header: unknown column {0:?}")]
    UnknownColumn(String),
    #[error("header: duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("header: missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: duplicate record_id {id:?}")]
    DuplicateRecordId { row: usize, id: String },
    #[error("empty dataset")]
    Empty,
    #[error("split ratio {0} is not in (0, 1)")]
    Ratio(f64),
    #[error("class {label} has {count} record(s); at least 2 are required to split")]
    TooFewInClass { label: Label, count: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

const LABEL_COLUMN: &str = "label";
const RECORD_ID_COLUMN: &str = "record_id";

enum Column {
    Feature(usize),
    Label,
    RecordId,
}

/// Parses a comma-separated dataset document against `schema`.
///
/// Rows are numbered from 1 for the header, so the first data row is row 2.
pub fn load_dataset(source: &str, schema: &FeatureSchema) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());

    let header = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(header.len());
    let mut seen = HashSet::new();
    for name in header.iter() {
        if !seen.insert(name.to_string()) {
            return Err(DatasetError::DuplicateColumn(name.to_string()));
        }
        let col = match name {
            LABEL_COLUMN => Column::Label,
            RECORD_ID_COLUMN => Column::RecordId,
            _ => Column::Feature(
                schema
                    .index_of(name)
                    .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?,
            ),
        };
        columns.push(col);
    }
    for id in schema.feature_ids() {
        if !seen.contains(id) {
            return Err(DatasetError::MissingColumn(id.to_string()));
        }
    }
    if !seen.contains(LABEL_COLUMN) {
        return Err(DatasetError::MissingColumn(LABEL_COLUMN.into()));
    }

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 2;
        let row = row?;
        if row.len() != columns.len() {
            return Err(DatasetError::RowWidth {
                row: row_no,
                expected: columns.len(),
                found: row.len(),
            });
        }
        let mut values = vec![0.0; FEATURE_COUNT];
        let mut label = None;
        let mut record_id = None;
        for ((cell, col), name) in row.iter().zip(&columns).zip(header.iter()) {
            let cell_err = |message: String| DatasetError::Cell {
                row: row_no,
                column: name.to_string(),
                message,
            };
            match col {
                Column::Feature(idx) => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| cell_err(format!("non-numeric value {cell:?}")))?;
                    if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                        return Err(cell_err(format!("value {cell} outside [0, 1]")));
                    }
                    values[*idx] = v;
                }
                Column::Label => {
                    label = Some(Label::parse(cell).ok_or_else(|| {
                        cell_err(format!(
                            "label {cell:?} is not one of incident, serious_incident"
                        ))
                    })?);
                }
                Column::RecordId => {
                    if cell.is_empty() {
                        return Err(cell_err("empty record_id".into()));
                    }
                    record_id = Some(cell.to_string());
                }
            }
        }
        let record_id = record_id.unwrap_or_else(|| format!("row-{row_no}"));
        if !ids.insert(record_id.clone()) {
            return Err(DatasetError::DuplicateRecordId {
                row: row_no,
                id: record_id,
            });
        }
        records.push(LabeledRecord {
            record_id,
            // Values were range-checked cell by cell above.
            features: FeatureVector::new(values).expect("validated cells"),
            label: label.expect("label column present"),
        });
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(Dataset {
        schema_version: schema.version.clone(),
        records,
    })
}

/// Writes the dataset as CSV: schema feature ids, `label`, `record_id`.
pub fn write_dataset<W: Write>(
    d: &Dataset,
    schema: &FeatureSchema,
    out: W,
) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = schema.feature_ids();
    header.push(LABEL_COLUMN);
    header.push(RECORD_ID_COLUMN);
    w.write_record(&header)?;
    for r in &d.records {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.label.as_str().to_string());
        row.push(r.record_id.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

impl Dataset {
    pub fn new(schema_version: impl Into<String>, records: Vec<LabeledRecord>) -> Self {
        Self {
            schema_version: schema_version.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema_version: self.schema_version.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// `(n_incident, n_serious)`.
pub fn class_counts(d: &Dataset) -> (usize, usize) {
    let serious = d.records.iter().filter(|r| r.label.is_positive()).count();
    (d.records.len() - serious, serious)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified split: each class contributes `round(ratio × class size)` records
/// to train (half rounds up), chosen by a seeded Fisher–Yates shuffle.
pub fn stratified_split(d: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair, DatasetError> {
    split_with(d, ratio, seed, true)
}

/// As [`stratified_split`] but shuffles the whole dataset together, so class
/// proportions are only preserved in expectation.
pub fn random_split(d: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair, DatasetError> {
    split_with(d, ratio, seed, false)
}

fn split_with(
    d: &Dataset,
    ratio: f64,
    seed: u64,
    stratify: bool,
) -> Result<SplitPair, DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::Ratio(ratio));
    }
    if d.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut rng = SplitMix64::new(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    if stratify {
        for label in Label::ALL {
            let mut members: Vec<usize> = (0..d.len())
                .filter(|&i| d.records[i].label == label)
                .collect();
            if members.len() < 2 {
                return Err(DatasetError::TooFewInClass {
                    label,
                    count: members.len(),
                });
            }
            rng.shuffle(&mut members);
            let n_train = round_half_up(ratio * members.len() as f64);
            train_idx.extend_from_slice(&members[..n_train]);
            test_idx.extend_from_slice(&members[n_train..]);
        }
    } else {
        let mut all: Vec<usize> = (0..d.len()).collect();
        rng.shuffle(&mut all);
        let n_train = round_half_up(ratio * all.len() as f64);
        train_idx.extend_from_slice(&all[..n_train]);
        test_idx.extend_from_slice(&all[n_train..]);
    }
    // Keep the original record order on each side.
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitPair {
        train: d.subset(&train_idx),
        test: d.subset(&test_idx),
        seed,
        ratio,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::toy_dataset;
    use super::*;
    use crate::schema::canonical_schema;

    fn csv_for(d: &Dataset) -> String {
        let mut buf = Vec::new();
        write_dataset(d, &canonical_schema(), &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let d = toy_dataset(6, 4, 1);
        let back = load_dataset(&csv_for(&d), &canonical_schema()).unwrap();
        assert_eq!(back.records, d.records);
    }

    #[test]
    fn loads_without_record_id_column() {
        let schema = canonical_schema();
        let mut text = schema.feature_ids().join(",");
        text.push_str(",label\n");
        text.push_str(&vec!["0"; 61].join(","));
        text.push_str(",serious_incident\n");
        let d = load_dataset(&text, &schema).unwrap();
        assert_eq!(d.records[0].record_id, "row-2");
        assert_eq!(d.records[0].label, Label::SeriousIncident);
    }

    #[test]
    fn out_of_range_cell_reports_location() {
        let schema = canonical_schema();
        let text = csv_for(&toy_dataset(2, 2, 1));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
        cells[4] = "2".into();
        lines[2] = cells.join(",");
        let err = load_dataset(&lines.join("\n"), &schema).unwrap_err();
        match err {
            DatasetError::Cell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, schema.feature_at(4).unwrap().id);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_numeric_and_bad_label_rejected() {
        let schema = canonical_schema();
        let text = csv_for(&toy_dataset(2, 2, 1));
        let bad = text.replacen(",incident,", ",accident,", 1);
        assert!(matches!(
            load_dataset(&bad, &schema),
            Err(DatasetError::Cell { .. })
        ));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[1] = lines[1].replacen('0', "x", 1);
        assert!(matches!(
            load_dataset(&lines.join("\n"), &schema),
            Err(DatasetError::Cell { .. })
        ));
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let schema = canonical_schema();
        let text = format!("{},label\n", schema.feature_ids().join(","));
        let err = load_dataset(&text, &schema).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn unknown_and_missing_columns_rejected() {
        let schema = canonical_schema();
        let text = format!("{},label,bogus\n", schema.feature_ids().join(","));
        assert!(matches!(
            load_dataset(&text, &schema),
            Err(DatasetError::UnknownColumn(c)) if c == "bogus"
        ));
        let text = format!("{}\n", schema.feature_ids().join(","));
        assert!(matches!(
            load_dataset(&text, &schema),
            Err(DatasetError::MissingColumn(c)) if c == "label"
        ));
    }

    #[test]
    fn class_counts_examples() {
        assert_eq!(class_counts(&toy_dataset(3, 2, 0)), (3, 2));
        assert_eq!(class_counts(&Dataset::new("v", vec![])), (0, 0));
        assert_eq!(class_counts(&toy_dataset(285, 190, 0)), (285, 190));
    }

    #[test]
    fn split_475_matches_arithmetic() {
        let d = toy_dataset(285, 190, 5);
        for seed in [0, 1, 99] {
            let s = stratified_split(&d, 0.8, seed).unwrap();
            assert_eq!(class_counts(&s.train), (228, 152));
            assert_eq!(class_counts(&s.test), (57, 38));
        }
    }

    #[test]
    fn half_split_of_four() {
        let d = toy_dataset(2, 2, 5);
        let s = stratified_split(&d, 0.5, 3).unwrap();
        assert_eq!(class_counts(&s.train), (1, 1));
        assert_eq!(class_counts(&s.test), (1, 1));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let d = toy_dataset(30, 20, 5);
        let a = stratified_split(&d, 0.8, 42).unwrap();
        let b = stratified_split(&d, 0.8, 42).unwrap();
        assert_eq!(a, b);
        let train: HashSet<&str> = a
            .train
            .records
            .iter()
            .map(|r| r.record_id.as_str())
            .collect();
        let test: HashSet<&str> = a
            .test
            .records
            .iter()
            .map(|r| r.record_id.as_str())
            .collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), d.len());
    }

    #[test]
    fn distinct_seeds_give_distinct_memberships() {
        let d = toy_dataset(60, 40, 5);
        let memberships: HashSet<Vec<String>> = (0..20)
            .map(|seed| {
                let s = stratified_split(&d, 0.8, seed).unwrap();
                s.train.records.into_iter().map(|r| r.record_id).collect()
            })
            .collect();
        assert!(memberships.len() >= 19);
    }

    #[test]
    fn split_preconditions() {
        let d = toy_dataset(5, 1, 0);
        assert!(matches!(
            stratified_split(&d, 0.8, 0),
            Err(DatasetError::TooFewInClass {
                label: Label::SeriousIncident,
                count: 1
            })
        ));
        let d = toy_dataset(5, 5, 0);
        assert!(matches!(
            stratified_split(&d, 1.0, 0),
            Err(DatasetError::Ratio(_))
        ));
        assert!(matches!(
            stratified_split(&d, 0.0, 0),
            Err(DatasetError::Ratio(_))
        ));
    }

    #[test]
    fn unstratified_split_sizes() {
        let d = toy_dataset(285, 190, 5);
        let s = random_split(&d, 0.8, 7).unwrap();
        assert_eq!(s.train.len(), 380);
        assert_eq!(s.test.len(), 95);
    }
}
