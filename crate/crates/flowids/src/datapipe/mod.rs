//! Data preprocessing: CSV ingestion, label/categorical encoding, feature
//! cleaning, min-max scaling, class balancing, and stratified splitting,
//! producing model-ready datasets.
//!
//! The stages run in a fixed order driven by [`PipelineConfig`]:
//!
//! 1. parse + clean (drop rows with non-finite numeric cells)
//! 2. encode labels and categoricals (fitted on the full table)
//! 3. scale (optional)
//! 4. balance then split (default), or split then balance the training side
//!    only (`BalanceOrder::TrainOnly`, the leakage-free alternative)
//!
//! Every random choice comes from one seeded stream, so the same
//! (file, schema, config) is bit-reproducible.

pub mod balance;
mod encode;
mod scale;
mod schema;
mod split;
mod synth;
mod table;

pub use balance::{class_counts, random_oversample, smote, smote_interpolate};
pub use encode::{encode_categoricals, encode_labels};
pub use scale::{scale_apply, scale_fit, ScalerState};
pub use schema::{load_schema, SchemaConfig};
pub use split::{stratified_split, take_rows};
pub use synth::make_blobs;
pub use table::{load_csv, RawTable};

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Matrix2, Matrix3};

/// A model-ready dataset: numeric features, integer labels, and the names
/// behind both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix2,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.labels.len() {
            return Err(Error::Data(format!(
                "dataset: {} feature rows vs {} labels",
                self.features.rows(),
                self.labels.len()
            )));
        }
        if self.features.cols() != self.feature_names.len() {
            return Err(Error::Data(format!(
                "dataset: {} feature columns vs {} feature names",
                self.features.cols(),
                self.feature_names.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.n_classes()) {
            return Err(Error::Data(format!(
                "dataset: label {bad} out of range for {} classes",
                self.n_classes()
            )));
        }
        Ok(())
    }

    /// View each row as a `(features, 1)` sequence for the model.
    pub fn to_sequences(&self) -> Matrix3 {
        Matrix3::from_flat(self.features.clone(), self.features.cols(), 1)
            .expect("row width matches steps*1")
    }
}

/// Assemble a [`Dataset`] from a parsed table: feature columns keep their CSV
/// order (minus label and dropped columns), categoricals become their codes.
pub fn build_dataset(raw: &RawTable, schema: &SchemaConfig) -> Result<Dataset> {
    schema.validate()?;
    if raw.rows.is_empty() {
        return Err(Error::Data(
            "table has no rows after cleaning; nothing to build".to_string(),
        ));
    }
    let (labels, class_names) = encode_labels(raw, schema)?;
    let categorical = encode_categoricals(raw, schema)?;

    let feature_cols: Vec<(usize, &String)> = raw
        .columns
        .iter()
        .enumerate()
        .filter(|(_, name)| **name != schema.label_column && !schema.drop_columns.contains(name))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns remain".to_string()));
    }

    let n = raw.rows.len();
    let d = feature_cols.len();
    let mut data = vec![0.0f64; n * d];
    for (out_col, (col, name)) in feature_cols.iter().enumerate() {
        if let Some(codes) = categorical.get(*name) {
            for (r, &code) in codes.iter().enumerate() {
                data[r * d + out_col] = code;
            }
        } else {
            for (r, row) in raw.rows.iter().enumerate() {
                data[r * d + out_col] = row[*col].trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "column `{name}` row {r}: `{}` is not numeric",
                        row[*col]
                    ))
                })?;
            }
        }
    }

    let ds = Dataset {
        features: Matrix2::from_vec(n, d, data)?,
        labels,
        class_names,
        feature_names: feature_cols.iter().map(|(_, n)| (*n).clone()).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

/// Balancing strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMethod {
    None,
    Smote,
    Random,
}

/// Whether balancing sees the whole dataset or only the training side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceOrder {
    /// Balance the full dataset, then split (matches the experiment setup).
    BeforeSplit,
    /// Split first, then balance only the training side (leakage-free).
    TrainOnly,
}

/// Stage configuration for [`preprocess`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub balance: BalanceMethod,
    pub balance_order: BalanceOrder,
    pub train_fraction: f64,
    /// Min-max scale features to [0, 1]. On by default; disable for strict
    /// raw-feature runs.
    pub scale: bool,
    pub smote_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            balance: BalanceMethod::None,
            balance_order: BalanceOrder::BeforeSplit,
            train_fraction: 0.8,
            scale: true,
            smote_k: 5,
        }
    }
}

/// What the pipeline did, for the preprocessing summary.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub class_names: Vec<String>,
    pub counts_before_balancing: Vec<usize>,
    pub counts_after_balancing: Vec<usize>,
    pub train_size: usize,
    pub val_size: usize,
}

fn apply_balance(ds: &Dataset, cfg: &PipelineConfig, rng: &mut Rng) -> Result<Dataset> {
    match cfg.balance {
        BalanceMethod::None => Ok(ds.clone()),
        BalanceMethod::Smote => smote(ds, cfg.smote_k, rng),
        BalanceMethod::Random => random_oversample(ds, rng),
    }
}

/// Run scaling, balancing, and splitting on an encoded dataset.
///
/// `balance_rng` and `split_rng` are independent streams so the two stages
/// never perturb each other.
pub fn preprocess(
    ds: &Dataset,
    cfg: &PipelineConfig,
    balance_rng: &mut Rng,
    split_rng: &mut Rng,
) -> Result<(Dataset, Dataset, PipelineSummary)> {
    ds.validate()?;
    let counts_before = class_counts(&ds.labels, ds.n_classes());

    let (train, val, counts_after) = match cfg.balance_order {
        BalanceOrder::BeforeSplit => {
            let scaled = if cfg.scale {
                let scaler = scale_fit(&ds.features);
                Dataset {
                    features: scale_apply(&scaler, &ds.features),
                    ..ds.clone()
                }
            } else {
                ds.clone()
            };
            let balanced = apply_balance(&scaled, cfg, balance_rng)?;
            let counts_after = class_counts(&balanced.labels, balanced.n_classes());
            let (train, val) = stratified_split(&balanced, cfg.train_fraction, split_rng)?;
            (train, val, counts_after)
        }
        BalanceOrder::TrainOnly => {
            let (mut train, mut val) = stratified_split(ds, cfg.train_fraction, split_rng)?;
            if cfg.scale {
                let scaler = scale_fit(&train.features);
                train.features = scale_apply(&scaler, &train.features);
                val.features = scale_apply(&scaler, &val.features);
            }
            let train = apply_balance(&train, cfg, balance_rng)?;
            let counts_after = class_counts(&train.labels, train.n_classes());
            (train, val, counts_after)
        }
    };

    let summary = PipelineSummary {
        rows_kept: ds.len(),
        rows_dropped: 0,
        class_names: ds.class_names.clone(),
        counts_before_balancing: counts_before,
        counts_after_balancing: counts_after,
        train_size: train.len(),
        val_size: val.len(),
    };
    Ok((train, val, summary))
}

// ---------------------------------------------------------------------------
// Dataset serialization: a CSV (features + trailing `label` column) paired
// with a JSON sidecar naming the classes and features. Floats are written
// with Rust's shortest round-trip formatting, so save/load is lossless and
// rewriting an unchanged dataset is byte-identical.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

/// Write `name.csv` and `name.meta.json` under `dir`.
pub fn save_dataset(ds: &Dataset, dir: &Path, name: &str) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let mut csv_out = String::new();
    for fname in &ds.feature_names {
        csv_out.push_str(fname);
        csv_out.push(',');
    }
    csv_out.push_str("label\n");
    for r in 0..ds.len() {
        for v in ds.features.row(r) {
            csv_out.push_str(&format!("{v},"));
        }
        csv_out.push_str(&format!("{}\n", ds.labels[r]));
    }
    fs::write(dir.join(format!("{name}.csv")), csv_out)?;

    let meta = DatasetMeta {
        class_names: ds.class_names.clone(),
        feature_names: ds.feature_names.clone(),
    };
    let mut f = fs::File::create(dir.join(format!("{name}.meta.json")))?;
    f.write_all(
        serde_json::to_string_pretty(&meta)
            .expect("plain struct")
            .as_bytes(),
    )?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Read a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let meta_path = dir.join(format!("{name}.meta.json"));
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", meta_path.display())))?;

    let csv_path = dir.join(format!("{name}.csv"));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", csv_path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut expected = meta.feature_names.clone();
    expected.push("label".to_string());
    if headers != expected {
        return Err(Error::Data(format!(
            "{}: header does not match the dataset metadata",
            csv_path.display()
        )));
    }

    let d = meta.feature_names.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Data(format!("{}: row {}: {e}", csv_path.display(), line + 2)))?;
        for i in 0..d {
            let v: f64 = record[i].parse().map_err(|_| {
                Error::Data(format!(
                    "{}: row {}: `{}` is not numeric",
                    csv_path.display(),
                    line + 2,
                    &record[i]
                ))
            })?;
            data.push(v);
        }
        let y: usize = record[d].parse().map_err(|_| {
            Error::Data(format!(
                "{}: row {}: bad label `{}`",
                csv_path.display(),
                line + 2,
                &record[d]
            ))
        })?;
        labels.push(y);
    }

    let n = labels.len();
    let ds = Dataset {
        features: Matrix2::from_vec(n, d, data)?,
        labels,
        class_names: meta.class_names,
        feature_names: meta.feature_names,
    };
    ds.validate()?;
    Ok(ds)
}
