//! Min-max feature scaling to [0, 1].
//!
//! Flow features mix magnitudes wildly (port numbers, byte counts, rates),
//! which stalls gradient training. Fit on one feature matrix, apply to any
//! other; values outside the fitted range map outside [0, 1] unclipped, and
//! constant features map to 0.

use crate::tensor::Matrix2;

/// Fitted per-feature minima and maxima. Constructing one is the "fit" step,
/// so applying an unfitted scaler is unrepresentable.
#[derive(Debug, Clone)]
pub struct ScalerState {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

pub fn scale_fit(features: &Matrix2) -> ScalerState {
    let d = features.cols();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for r in 0..features.rows() {
        for (c, &v) in features.row(r).iter().enumerate() {
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    ScalerState { mins, maxs }
}

pub fn scale_apply(state: &ScalerState, features: &Matrix2) -> Matrix2 {
    assert_eq!(
        features.cols(),
        state.mins.len(),
        "scale_apply: feature width differs from the fitted scaler"
    );
    let mut out = features.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            let span = state.maxs[c] - state.mins[c];
            *v = if span > 0.0 {
                (*v - state.mins[c]) / span
            } else {
                0.0
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_fitted_range_to_unit_interval() {
        let x = Matrix2::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]);
        let s = scale_fit(&x);
        let y = scale_apply(&s, &x);
        assert_eq!(y.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let x = Matrix2::from_rows(&[vec![7.0], vec![7.0]]);
        let s = scale_fit(&x);
        let y = scale_apply(&s, &x);
        assert_eq!(y.data(), &[0.0, 0.0]);
    }

    #[test]
    fn out_of_range_values_are_not_clipped() {
        let train = Matrix2::from_rows(&[vec![0.0], vec![10.0]]);
        let s = scale_fit(&train);
        let y = scale_apply(&s, &Matrix2::from_rows(&[vec![-5.0], vec![20.0]]));
        assert_eq!(y.data(), &[-0.5, 2.0]);
    }
}
