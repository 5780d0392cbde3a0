//! The model's building blocks, each as a forward pass plus a hand-derived
//! backward pass returning parameter and input gradients. Every backward pass
//! in this module is covered by a central-finite-difference check in its unit
//! tests.

mod dense;
mod lstm;
mod se;
mod vit;

pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use lstm::{
    bilstm_backward, bilstm_forward, concat_channels, lstm_backward_seq, lstm_cell_step,
    lstm_forward_seq, reverse_time, split_channels, BiLstmCache, BiLstmGrads, BiLstmParams,
    LstmGrads, LstmParams, LstmSeqCache,
};
pub use se::{se_backward, se_forward, SeGrads, SeParams};
pub use vit::{
    layer_norm_backward, layer_norm_forward, vit_se_block_backward, vit_se_block_forward,
    LayerNormGrads, LayerNormParams, VitBlockCache,
};

use crate::error::{Error, Result};
use crate::tensor::Matrix2;

/// Row-wise concatenation: `a`'s columns first, then `b`'s.
pub fn concat_features(a: &Matrix2, b: &Matrix2) -> Result<Matrix2> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "concat_features",
            format!("{} rows vs {} rows", a.rows(), b.rows()),
        ));
    }
    let mut out = Matrix2::zeros(a.rows(), a.cols() + b.cols());
    for r in 0..a.rows() {
        let row = out.row_mut(r);
        row[..a.cols()].copy_from_slice(a.row(r));
        row[a.cols()..].copy_from_slice(b.row(r));
    }
    Ok(out)
}

/// Inverse of [`concat_features`]: split columns at `left_cols`.
pub fn split_features(x: &Matrix2, left_cols: usize) -> Result<(Matrix2, Matrix2)> {
    if left_cols > x.cols() {
        return Err(Error::shape(
            "split_features",
            format!("cannot take {left_cols} of {} cols", x.cols()),
        ));
    }
    let mut left = Matrix2::zeros(x.rows(), left_cols);
    let mut right = Matrix2::zeros(x.rows(), x.cols() - left_cols);
    for r in 0..x.rows() {
        let row = x.row(r);
        left.row_mut(r).copy_from_slice(&row[..left_cols]);
        right.row_mut(r).copy_from_slice(&row[left_cols..]);
    }
    Ok((left, right))
}
