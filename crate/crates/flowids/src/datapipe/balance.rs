//! Class balancing by oversampling.
//!
//! Both samplers leave every original row in place (originals form a prefix
//! of the output, in their original order) and append synthetic rows until
//! every class count equals the pre-balancing majority count. Synthetic rows
//! are appended grouped by class in ascending class order, so results are
//! fully determined by (dataset, seed).

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Matrix2;

use super::Dataset;

/// Rows per class, indexed by class.
pub fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    counts
}

fn per_class_rows(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); ds.n_classes()];
    for (i, &y) in ds.labels.iter().enumerate() {
        rows[y].push(i);
    }
    rows
}

fn rebuild(ds: &Dataset, extra_rows: Vec<(Vec<f64>, usize)>) -> Dataset {
    let d = ds.features.cols();
    let mut data = ds.features.data().to_vec();
    let mut labels = ds.labels.clone();
    for (row, label) in extra_rows {
        data.extend(row);
        labels.push(label);
    }
    let n = labels.len();
    Dataset {
        features: Matrix2::from_vec(n, d, data).expect("shape by construction"),
        labels,
        class_names: ds.class_names.clone(),
        feature_names: ds.feature_names.clone(),
    }
}

/// Duplicate minority rows uniformly with replacement until all classes
/// reach the majority count.
pub fn random_oversample(ds: &Dataset, rng: &mut Rng) -> Result<Dataset> {
    let by_class = per_class_rows(ds);
    let majority = by_class.iter().map(Vec::len).max().unwrap_or(0);
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!(
            "random_oversample: class `{}` has no rows",
            ds.class_names[empty]
        )));
    }
    let mut extra = Vec::new();
    for (class, rows) in by_class.iter().enumerate() {
        for _ in rows.len()..majority {
            let pick = rows[rng.random_range(0..rows.len())];
            extra.push((ds.features.row(pick).to_vec(), class));
        }
    }
    Ok(rebuild(ds, extra))
}

/// Linear interpolation toward a neighbor: `base + lambda * (neighbor - base)`.
pub fn smote_interpolate(base: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    base.iter()
        .zip(neighbor)
        .map(|(&a, &b)| a + lambda * (b - a))
        .collect()
}

/// Classic SMOTE: each synthetic row interpolates between a random minority
/// row and one of its `k` nearest same-class neighbors (Euclidean distance,
/// `k` clamped to class size minus one, interpolation factor uniform in
/// [0, 1)).
pub fn smote(ds: &Dataset, k: usize, rng: &mut Rng) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Config("smote: k must be >= 1".to_string()));
    }
    let by_class = per_class_rows(ds);
    let majority = by_class.iter().map(Vec::len).max().unwrap_or(0);
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() < majority && rows.len() < 2 {
            return Err(Error::Data(format!(
                "smote: class `{}` has {} row(s); it needs at least 2 — use random oversampling instead",
                ds.class_names[class],
                rows.len()
            )));
        }
    }

    let mut extra = Vec::new();
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() >= majority {
            continue;
        }
        let k_eff = k.min(rows.len() - 1);
        // Neighbor lists are computed lazily per distinct base row and cached.
        let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
        for _ in rows.len()..majority {
            let base_pos = rng.random_range(0..rows.len());
            let neighbors = neighbor_cache[base_pos]
                .get_or_insert_with(|| nearest_same_class(&ds.features, rows, base_pos, k_eff));
            let neighbor_row = neighbors[rng.random_range(0..neighbors.len())];
            let lambda: f64 = rng.random();
            extra.push((
                smote_interpolate(
                    ds.features.row(rows[base_pos]),
                    ds.features.row(neighbor_row),
                    lambda,
                ),
                class,
            ));
        }
    }
    Ok(rebuild(ds, extra))
}

/// Indices (into the full feature matrix) of the `k` nearest same-class rows
/// to `rows[base_pos]`, excluding itself. Ties break by row index so the
/// result is deterministic.
fn nearest_same_class(features: &Matrix2, rows: &[usize], base_pos: usize, k: usize) -> Vec<usize> {
    let base = features.row(rows[base_pos]);
    let mut dists: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != base_pos)
        .map(|(_, &row)| {
            let d2: f64 = features
                .row(row)
                .iter()
                .zip(base)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, row)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists.into_iter().take(k).map(|(_, row)| row).collect()
}
