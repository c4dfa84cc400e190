use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataTable, DatasetError, FeatureKind, Schema};

/// Name of the CSV column holding the binary outcome.
pub const TARGET_COLUMN: &str = "target";
/// Optional CSV column holding row identifiers; rows are numbered from 0 otherwise.
pub const ROW_ID_COLUMN: &str = "row_id";

/// What to do with empty feature cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Any empty or unparseable cell aborts ingestion.
    #[default]
    FailFast,
    /// Empty feature cells take the column mean over complete cells. Binary
    /// columns take the rounded mean so they stay in {0, 1}. A missing target
    /// always aborts.
    MeanImpute,
}

/// Read a comma-separated file with a header row.
///
/// Columns not named in `schema` (other than `target` / `row_id`) are ignored.
/// Row indices in errors count data rows from 0.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    policy: MissingPolicy,
) -> Result<DataTable, DatasetError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DatasetError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DatasetError::Io(e.to_string()))?;
    let headers = reader.headers().map_err(|e| DatasetError::Io(e.to_string()))?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();

    let target_col = *position
        .get(TARGET_COLUMN)
        .ok_or_else(|| DatasetError::MissingColumn(TARGET_COLUMN.into()))?;
    let feature_cols = schema
        .features()
        .iter()
        .map(|f| position.get(f.name.as_str()).copied().ok_or_else(|| DatasetError::MissingColumn(f.name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let id_col = position.get(ROW_ID_COLUMN).copied();

    let p = schema.len();
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut target = Vec::new();
    let mut row_ids = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DatasetError::Io(e.to_string()))?;
        let field = |col: usize| record.get(col).map(str::trim).unwrap_or("");

        let y = match field(target_col) {
            "0" | "0.0" => 0u8,
            "1" | "1.0" => 1u8,
            "" => return Err(DatasetError::ParseError { row, col: TARGET_COLUMN.into() }),
            other => match other.parse::<f64>() {
                Ok(v) => return Err(DatasetError::SchemaViolation { row, col: TARGET_COLUMN.into(), value: v }),
                Err(_) => return Err(DatasetError::ParseError { row, col: TARGET_COLUMN.into() }),
            },
        };
        target.push(y);
        row_ids.push(match id_col {
            Some(c) if !field(c).is_empty() => field(c).to_string(),
            _ => row.to_string(),
        });

        for (j, &col) in feature_cols.iter().enumerate() {
            let raw = field(col);
            let name = &schema.get(j).name;
            if raw.is_empty() {
                match policy {
                    MissingPolicy::FailFast => {
                        return Err(DatasetError::ParseError { row, col: name.clone() })
                    }
                    MissingPolicy::MeanImpute => cells.push(None),
                }
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| DatasetError::ParseError { row, col: name.clone() })?;
            if !v.is_finite() {
                return Err(DatasetError::ParseError { row, col: name.clone() });
            }
            if !schema.get(j).admits(v) {
                return Err(DatasetError::SchemaViolation { row, col: name.clone(), value: v });
            }
            cells.push(Some(v));
        }
    }

    let n = target.len();
    if n == 0 {
        return Err(DatasetError::EmptyFile);
    }

    let mut fill = vec![0.0; p];
    if cells.iter().any(Option::is_none) {
        for (j, slot) in fill.iter_mut().enumerate() {
            let observed: Vec<f64> = (0..n).filter_map(|i| cells[i * p + j]).collect();
            if observed.is_empty() {
                return Err(DatasetError::ParseError { row: 0, col: schema.get(j).name.clone() });
            }
            let m = observed.iter().sum::<f64>() / observed.len() as f64;
            *slot = match schema.get(j).kind {
                FeatureKind::Binary => m.round(),
                _ => m,
            };
        }
    }
    let values = cells.iter().enumerate().map(|(k, c)| c.unwrap_or(fill[k % p])).collect();
    DataTable::from_flat(schema.clone(), values, target, row_ids)
}

/// Write a table in the format `load_csv` reads (row_id, features..., target).
pub fn write_csv(table: &DataTable, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| DatasetError::Io(e.to_string()))?;
    let mut header = vec![ROW_ID_COLUMN.to_string()];
    header.extend(table.schema().names());
    header.push(TARGET_COLUMN.to_string());
    w.write_record(&header).map_err(|e| DatasetError::Io(e.to_string()))?;
    for i in 0..table.n_rows() {
        let mut rec = vec![table.row_ids()[i].clone()];
        rec.extend(table.row(i).iter().map(|v| v.to_string()));
        rec.push(table.target()[i].to_string());
        w.write_record(&rec).map_err(|e| DatasetError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| DatasetError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureGroup, FeatureSchema};
    use std::io::Write;

    fn schema() -> Schema {
        Schema::new(vec![
            FeatureSchema::new("Age", FeatureKind::Numeric, FeatureGroup::Demographic).bounded(0.0, 120.0),
            FeatureSchema::new("BMI", FeatureKind::Numeric, FeatureGroup::Aggregated),
            FeatureSchema::new("Female", FeatureKind::Binary, FeatureGroup::Demographic),
        ])
        .unwrap()
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn four_rows_in_file_order() {
        let f = file("Age,BMI,Female,target\n50,25,1,0\n60,30,0,1\n70,22.5,1,0\n55,28,0,1\n");
        let t = load_csv(f.path(), &schema(), MissingPolicy::FailFast).unwrap();
        assert_eq!((t.n_rows(), t.n_features()), (4, 3));
        assert_eq!(t.row(2), &[70.0, 22.5, 1.0]);
        assert_eq!(t.target(), &[0, 1, 0, 1]);
        assert_eq!(t.row_ids()[3], "3");
    }

    #[test]
    fn missing_column() {
        let f = file("Age,Female,target\n50,1,0\n");
        assert_eq!(
            load_csv(f.path(), &schema(), MissingPolicy::FailFast),
            Err(DatasetError::MissingColumn("BMI".into()))
        );
    }

    #[test]
    fn mean_impute_fills_column_mean() {
        let f = file("Age,BMI,Female,target\n50,25,1,0\n,30,0,1\n60,22,1,0\n70,28,0,1\n");
        let t = load_csv(f.path(), &schema(), MissingPolicy::MeanImpute).unwrap();
        assert_eq!(t.value(1, 0), 60.0);
    }

    #[test]
    fn fail_fast_rejects_blank() {
        let f = file("Age,BMI,Female,target\n50,25,1,0\n,30,0,1\n");
        assert_eq!(
            load_csv(f.path(), &schema(), MissingPolicy::FailFast),
            Err(DatasetError::ParseError { row: 1, col: "Age".into() })
        );
    }

    #[test]
    fn missing_target_aborts_under_impute() {
        let f = file("Age,BMI,Female,target\n50,25,1,\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), MissingPolicy::MeanImpute),
            Err(DatasetError::ParseError { col, .. }) if col == "target"
        ));
    }

    #[test]
    fn binary_impute_stays_binary() {
        let f = file("Age,BMI,Female,target\n50,25,1,0\n60,30,,1\n70,22,1,0\n");
        let t = load_csv(f.path(), &schema(), MissingPolicy::MeanImpute).unwrap();
        assert_eq!(t.value(1, 2), 1.0);
    }

    #[test]
    fn unparseable_and_out_of_range() {
        let f = file("Age,BMI,Female,target\nabc,25,1,0\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), MissingPolicy::FailFast),
            Err(DatasetError::ParseError { row: 0, .. })
        ));
        let f = file("Age,BMI,Female,target\n150,25,1,0\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), MissingPolicy::FailFast),
            Err(DatasetError::SchemaViolation { value, .. }) if value == 150.0
        ));
        let f = file("Age,BMI,Female,target\n50,25,2,0\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), MissingPolicy::FailFast),
            Err(DatasetError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn empty_and_missing_file() {
        let f = file("Age,BMI,Female,target\n");
        assert_eq!(load_csv(f.path(), &schema(), MissingPolicy::FailFast), Err(DatasetError::EmptyFile));
        assert!(matches!(
            load_csv("/nonexistent/x.csv", &schema(), MissingPolicy::FailFast),
            Err(DatasetError::MissingFile(_))
        ));
    }

    #[test]
    fn write_then_load_preserves_table() {
        let f = file("row_id,Age,BMI,Female,target\na,50,25.125,1,0\nb,60,30,0,1\n");
        let t = load_csv(f.path(), &schema(), MissingPolicy::FailFast).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&t, out.path()).unwrap();
        assert_eq!(load_csv(out.path(), &schema(), MissingPolicy::FailFast).unwrap(), t);
    }
}
