//! Label and categorical-feature encoding.
//!
//! Both encoders fit on the full table before any split, matching the
//! pipeline order the experiments use.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::schema::SchemaConfig;
use super::table::RawTable;

/// Encode the label column to integer class indices.
///
/// With a schema `class_map` the mapping is fixed and unseen labels error;
/// otherwise classes are the lexicographically sorted unique values.
pub fn encode_labels(raw: &RawTable, schema: &SchemaConfig) -> Result<(Vec<usize>, Vec<String>)> {
    let col = raw.column_index(&schema.label_column).ok_or_else(|| {
        Error::Data(format!(
            "label column `{}` not present",
            schema.label_column
        ))
    })?;
    let values: Vec<&str> = raw.rows.iter().map(|r| r[col].as_str()).collect();

    let (class_names, index_of): (Vec<String>, BTreeMap<String, usize>) =
        if let Some(names) = schema.mapped_class_names() {
            let map = schema
                .class_map
                .clone()
                .expect("checked by mapped_class_names");
            (names, map)
        } else {
            let mut unique: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            unique.sort();
            unique.dedup();
            let map = unique
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i))
                .collect();
            (unique, map)
        };

    let mut labels = Vec::with_capacity(values.len());
    for v in values {
        match index_of.get(v) {
            Some(&idx) => labels.push(idx),
            None => {
                return Err(Error::Data(format!(
                    "label `{v}` not present in the configured class map"
                )))
            }
        }
    }
    Ok((labels, class_names))
}

/// Encode every categorical column to sorted-unique integer codes (as f64),
/// fitted on the full table. Columns encode independently.
pub fn encode_categoricals(
    raw: &RawTable,
    schema: &SchemaConfig,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for name in &schema.categorical_columns {
        let col = raw.column_index(name).ok_or_else(|| {
            Error::Config(format!(
                "categorical column `{name}` not present in the table"
            ))
        })?;
        let mut unique: Vec<&str> = raw.rows.iter().map(|r| r[col].as_str()).collect();
        unique.sort_unstable();
        unique.dedup();
        let index_of: BTreeMap<&str, usize> =
            unique.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let codes = raw
            .rows
            .iter()
            .map(|r| index_of[r[col].as_str()] as f64)
            .collect();
        out.insert(name.clone(), codes);
    }
    Ok(out)
}
