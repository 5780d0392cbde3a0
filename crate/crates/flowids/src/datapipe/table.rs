//! CSV ingestion into a rectangular string table.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::schema::SchemaConfig;

/// A parsed CSV: column names plus row-major string cells. Rows rejected
/// during ingestion are only counted, never kept.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Parse a headered, comma-separated, UTF-8 file.
///
/// Rows whose non-categorical feature cells fail to parse as finite numbers
/// are dropped and counted in `dropped_rows`. Ragged rows and a missing label
/// column are hard errors.
pub fn load_csv(path: &Path, schema: &SchemaConfig) -> Result<RawTable> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: cannot read header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();

    if !columns.iter().any(|c| c == &schema.label_column) {
        return Err(Error::Data(format!(
            "{}: label column `{}` not present (columns: {})",
            path.display(),
            schema.label_column,
            columns.join(", ")
        )));
    }

    // Columns whose cells must parse as finite numbers.
    let exempt: HashSet<&str> = schema
        .drop_columns
        .iter()
        .chain(schema.categorical_columns.iter())
        .map(String::as_str)
        .chain(std::iter::once(schema.label_column.as_str()))
        .collect();
    let numeric_cols: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, name)| !exempt.contains(name.as_str()))
        .map(|(i, _)| i)
        .collect();

    let mut rows = Vec::new();
    let mut dropped_rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        if record.len() != columns.len() {
            return Err(Error::Data(format!(
                "{}: row {}: expected {} fields, found {}",
                path.display(),
                line + 2,
                columns.len(),
                record.len()
            )));
        }
        let numeric_ok = numeric_cols.iter().all(|&i| {
            record[i]
                .trim()
                .parse::<f64>()
                .map(|v| v.is_finite())
                .unwrap_or(false)
        });
        if numeric_ok {
            rows.push(record.iter().map(str::to_string).collect());
        } else {
            dropped_rows += 1;
        }
    }

    Ok(RawTable {
        columns,
        rows,
        dropped_rows,
    })
}
