//! Stratified train/validation splitting.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix2;

use super::Dataset;

/// Shuffle each class independently and cut at `round(fraction * count)`.
/// Train and validation are disjoint and their union is exactly the input;
/// every class lands within one row of the target fraction.
pub fn stratified_split(
    ds: &Dataset,
    train_fraction: f64,
    rng: &mut Rng,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if ds.labels.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".to_string()));
    }

    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    for class in 0..ds.n_classes() {
        let mut rows: Vec<usize> = (0..ds.labels.len())
            .filter(|&i| ds.labels[i] == class)
            .collect();
        rows.shuffle(rng);
        let n_train = ((train_fraction * rows.len() as f64).round() as usize).min(rows.len());
        train_rows.extend(&rows[..n_train]);
        val_rows.extend(&rows[n_train..]);
    }

    Ok((take_rows(ds, &train_rows), take_rows(ds, &val_rows)))
}

/// Build a dataset from the given row indices (in order).
pub fn take_rows(ds: &Dataset, rows: &[usize]) -> Dataset {
    let d = ds.features.cols();
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for &r in rows {
        data.extend(ds.features.row(r));
        labels.push(ds.labels[r]);
    }
    Dataset {
        features: Matrix2::from_vec(rows.len(), d, data).expect("shape by construction"),
        labels,
        class_names: ds.class_names.clone(),
        feature_names: ds.feature_names.clone(),
    }
}
