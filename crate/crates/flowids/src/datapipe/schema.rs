//! Dataset schema configuration.
//!
//! Flow datasets ship with different column layouts, so the pipeline is
//! driven by a small TOML file instead of hard-coded feature lists:
//!
//! ```toml
//! label_column = "Attack_type"
//! drop_columns = ["frame.time", "Attack_label"]
//! categorical_columns = ["http.request.method", "dns.qry.name"]
//!
//! # Optional fixed label mapping; omit to derive classes by sorted order.
//! [class_map]
//! "Normal" = 0
//! "DDoS" = 1
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SchemaConfig {
    /// Column holding the class label.
    pub label_column: String,
    /// Columns excluded from the feature set entirely.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    /// Columns encoded as sorted-unique integer codes instead of parsed
    /// as numbers.
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Optional fixed label-to-index mapping. When present, the indices must
    /// form a dense 0..k-1 range and unseen labels are an error; when absent,
    /// classes are the lexicographically sorted unique label values.
    #[serde(default)]
    pub class_map: Option<BTreeMap<String, usize>>,
}

impl SchemaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.label_column.is_empty() {
            return Err(Error::Config("schema: label_column is empty".to_string()));
        }
        if self.drop_columns.contains(&self.label_column) {
            return Err(Error::Config(format!(
                "schema: label column `{}` is also listed in drop_columns",
                self.label_column
            )));
        }
        if let Some(map) = &self.class_map {
            if map.is_empty() {
                return Err(Error::Config("schema: class_map is empty".to_string()));
            }
            let mut indices: Vec<usize> = map.values().copied().collect();
            indices.sort_unstable();
            let dense: Vec<usize> = (0..map.len()).collect();
            if indices != dense {
                return Err(Error::Config(format!(
                    "schema: class_map indices must be exactly 0..{}, got {indices:?}",
                    map.len() - 1
                )));
            }
        }
        Ok(())
    }

    /// Class names ordered by their mapped index.
    pub fn mapped_class_names(&self) -> Option<Vec<String>> {
        let map = self.class_map.as_ref()?;
        let mut names = vec![String::new(); map.len()];
        for (name, &idx) in map {
            names[idx] = name.clone();
        }
        Some(names)
    }
}

pub fn load_schema(path: &Path) -> Result<SchemaConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read schema {}: {e}", path.display())))?;
    let schema: SchemaConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse schema {}: {e}", path.display())))?;
    schema.validate()?;
    Ok(schema)
}
