//! Seeded synthetic datasets for tests and the acceptance suite.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::tensor::Matrix2;

use super::Dataset;

/// Isotropic Gaussian blobs, one per class. Class means are drawn uniformly
/// in [-2.5, 2.5] per coordinate; points scatter around them with the given
/// standard deviation. Rows interleave classes (0, 1, ..., k-1, 0, 1, ...)
/// so any prefix is roughly balanced.
pub fn make_blobs(
    n_classes: usize,
    n_per_class: usize,
    dims: usize,
    stddev: f64,
    rng: &mut Rng,
) -> Dataset {
    let means: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..dims).map(|_| rng.random_range(-2.5..2.5)).collect())
        .collect();

    let n = n_classes * n_per_class;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_per_class {
        let _ = i;
        for (class, mean) in means.iter().enumerate() {
            for &m in mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + stddev * z);
            }
            labels.push(class);
        }
    }

    Dataset {
        features: Matrix2::from_vec(n, dims, data).expect("shape by construction"),
        labels,
        class_names: (0..n_classes).map(|c| format!("class_{c}")).collect(),
        feature_names: (0..dims).map(|c| format!("f{c:02}")).collect(),
    }
}
