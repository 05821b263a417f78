//! CSV ingestion: datasets, label files, and membership fixtures.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::PatientRecord;

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map_or(0, |p| p.line())
}

/// Loads a dataset: header `id,<variable...>[,<label_column>]`, one record
/// per row, values parsed as finite reals, labels as `1`/`0` (empty = none).
pub fn load_dataset(path: &Path, label_column: Option<&str>) -> Result<Vec<PatientRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                Error::Io {
                    path: path.to_path_buf(),
                    source: io,
                }
            } else {
                unreachable!()
            }
        }
        _ => Error::Parse {
            line: csv_line(&e),
            column: "-".into(),
            message: e.to_string(),
        },
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: csv_line(&e),
            column: "-".into(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Parse {
            line: 1,
            column: "id".into(),
            message: "header has no id column".into(),
        })?;
    let label_col = label_column.and_then(|name| headers.iter().position(|h| h == name));

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: csv_line(&e),
            column: "-".into(),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                column: "id".into(),
                message: "empty patient id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        let mut values = BTreeMap::new();
        let mut label = None;
        for (col, raw) in row.iter().enumerate() {
            if col == id_col {
                continue;
            }
            let column = headers
                .get(col)
                .cloned()
                .unwrap_or_else(|| format!("#{col}"));
            if Some(col) == label_col {
                label = match raw.trim() {
                    "" => None,
                    "1" => Some(true),
                    "0" => Some(false),
                    other => {
                        return Err(Error::Parse {
                            line,
                            column,
                            message: format!("label must be 1 or 0, got {other:?}"),
                        })
                    }
                };
                continue;
            }
            let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                line,
                column: column.clone(),
                message: format!("expected a number, got {raw:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("value {raw:?} is not finite"),
                });
            }
            values.insert(column, value);
        }
        records.push(PatientRecord { id, values, label });
    }
    Ok(records)
}

/// Loads a label file: header `id,label`, values `1`/`0`.
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let records = load_dataset(path, Some("label"))?;
    let mut labels = BTreeMap::new();
    for record in records {
        let label = record.label.ok_or_else(|| Error::Parse {
            line: 0,
            column: "label".into(),
            message: format!("record {} has no label", record.id),
        })?;
        labels.insert(record.id, label);
    }
    Ok(labels)
}

/// Expected membership values to compare a run against; divergences beyond
/// the tolerance are listed in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipFixture {
    pub tolerance: f64,
    pub entries: Vec<FixtureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub id: String,
    pub variable: String,
    pub term: String,
    pub value: f64,
}

pub fn load_fixture(path: &Path) -> Result<MembershipFixture> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let fixture: MembershipFixture = serde_json::from_str(&text)?;
    if !fixture.tolerance.is_finite() || fixture.tolerance < 0.0 {
        return Err(Error::Artifact {
            path: path.to_path_buf(),
            reason: format!("tolerance {} must be a nonnegative real", fixture.tolerance),
        });
    }
    Ok(fixture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_rows_in_order_with_values() {
        let f = write_file("id,age,tlc\nv_1,6,3600\nv_2,75,3650\n");
        let records = load_dataset(f.path(), None).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, "v_1");
        assert_eq!(records[0].values["age"], 6.0);
        assert_eq!(records[1].values["tlc"], 3650.0);
        assert_eq!(records[0].label, None);
    }

    #[test]
    fn header_only_file_yields_empty_list() {
        let f = write_file("id,age\n");
        assert!(load_dataset(f.path(), None).unwrap().is_empty());
    }

    #[test]
    fn non_numeric_value_reports_line_and_column() {
        let f = write_file("id,age,tlc\nv_1,6,3600\nv_2,75,abc\n");
        match load_dataset(f.path(), None).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "tlc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let f = write_file("id,age\nv_1,6\nv_1,7\n");
        assert!(matches!(
            load_dataset(f.path(), None),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn label_column_is_parsed_and_excluded_from_values() {
        let f = write_file("id,age,label\nv_1,6,1\nv_2,8,0\nv_3,9,\n");
        let records = load_dataset(f.path(), Some("label")).unwrap();
        assert_eq!(records[0].label, Some(true));
        assert_eq!(records[1].label, Some(false));
        assert_eq!(records[2].label, None);
        assert!(!records[0].values.contains_key("label"));
    }

    #[test]
    fn malformed_label_is_a_parse_error() {
        let f = write_file("id,age,label\nv_1,6,yes\n");
        assert!(matches!(
            load_dataset(f.path(), Some("label")),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_dataset(Path::new("/nonexistent/data.csv"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn labels_file_round_trip() {
        let f = write_file("id,label\nv_1,1\nv_2,0\n");
        let labels = load_labels(f.path()).unwrap();
        assert!(labels["v_1"]);
        assert!(!labels["v_2"]);
    }

    #[test]
    fn unlabeled_row_in_label_file_is_rejected() {
        let f = write_file("id,label\nv_1,\n");
        assert!(load_labels(f.path()).is_err());
    }
}
