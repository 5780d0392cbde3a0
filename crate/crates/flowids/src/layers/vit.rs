//! The attention branch's token block: embed each step into a wider channel
//! space, recalibrate channels with squeeze-excitation, add the embedding
//! back as a residual, layer-normalize per token, and flatten.
//!
//! The residual skip uses the embedded tokens (the input "at that point in
//! the branch"); the raw input has the wrong width for a skip without an
//! extra projection. There is exactly one block and no feed-forward sublayer.

use crate::error::Result;
use crate::tensor::{layer_norm, mean_var, Activation, Matrix2, Matrix3};

use super::dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
use super::se::{se_backward, se_forward, SeGrads, SeParams};

/// Per-channel gain/bias for layer normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub eps: f64,
}

impl LayerNormParams {
    /// Unit gain, zero bias, the usual 1e-5 epsilon.
    pub fn identity(channels: usize) -> Self {
        LayerNormParams {
            gain: vec![1.0; channels],
            bias: vec![0.0; channels],
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gain.len()
    }

    pub fn param_count(&self) -> usize {
        self.gain.len() + self.bias.len()
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn layer_norm_forward(p: &LayerNormParams, x: &Matrix2) -> Matrix2 {
    layer_norm(x, &p.gain, &p.bias, p.eps)
}

/// Analytic layer-norm gradients (population variance).
pub fn layer_norm_backward(
    p: &LayerNormParams,
    x: &Matrix2,
    upstream: &Matrix2,
) -> (LayerNormGrads, Matrix2) {
    let cols = x.cols();
    let mut gain_grad = vec![0.0; cols];
    let mut bias_grad = vec![0.0; cols];
    let mut input_grad = Matrix2::zeros(x.rows(), cols);
    let n = cols as f64;

    for r in 0..x.rows() {
        let row = x.row(r);
        let up = upstream.row(r);
        let (mean, var) = mean_var(row);
        let inv = 1.0 / (var + p.eps).sqrt();

        // normalized = (x - mean) * inv; d_normalized = upstream * gain
        let mut dn_mean = 0.0;
        let mut dn_dot_norm = 0.0;
        for c in 0..cols {
            let norm = (row[c] - mean) * inv;
            let dn = up[c] * p.gain[c];
            gain_grad[c] += up[c] * norm;
            bias_grad[c] += up[c];
            dn_mean += dn;
            dn_dot_norm += dn * norm;
        }
        dn_mean /= n;
        dn_dot_norm /= n;
        for c in 0..cols {
            let norm = (row[c] - mean) * inv;
            let dn = up[c] * p.gain[c];
            input_grad.set(r, c, inv * (dn - dn_mean - norm * dn_dot_norm));
        }
    }

    (
        LayerNormGrads {
            gain: gain_grad,
            bias: bias_grad,
        },
        input_grad,
    )
}

/// Intermediates saved by [`vit_se_block_forward`].
#[derive(Debug, Clone)]
pub struct VitBlockCache {
    batch: usize,
    steps: usize,
    input_tokens: Matrix2,
    embedded: Matrix3,
    norm_input: Matrix2,
}

/// Forward pass of the block. Returns the flattened `(batch x steps*E)`
/// output and the cache for [`vit_se_block_backward`].
pub fn vit_se_block_forward(
    embed: &DenseParams,
    se: &SeParams,
    ln: &LayerNormParams,
    x: &Matrix3,
) -> Result<(Matrix2, VitBlockCache)> {
    let (batch, steps) = (x.batch(), x.steps());
    let input_tokens = x.clone().into_tokens();
    let embedded_tokens = dense_forward(embed, &input_tokens, Activation::Relu)?;
    let embedded = Matrix3::from_tokens(embedded_tokens, batch, steps)?;
    let (recalibrated, _gates) = se_forward(se, &embedded)?;
    let norm_input = embedded.add(&recalibrated)?.into_tokens();
    let normed = layer_norm_forward(ln, &norm_input);
    let flat = Matrix3::from_tokens(normed, batch, steps)?.flatten_instances();
    Ok((
        flat,
        VitBlockCache {
            batch,
            steps,
            input_tokens,
            embedded,
            norm_input,
        },
    ))
}

/// Backward pass of the block given `dLoss/dFlat`.
pub fn vit_se_block_backward(
    embed: &DenseParams,
    se: &SeParams,
    ln: &LayerNormParams,
    cache: &VitBlockCache,
    upstream_flat: &Matrix2,
) -> Result<(DenseGrads, SeGrads, LayerNormGrads, Matrix3)> {
    let embed_width = ln.channels();
    let up_tokens =
        Matrix3::from_flat(upstream_flat.clone(), cache.steps, embed_width)?.into_tokens();
    let (ln_grads, d_norm_input) = layer_norm_backward(ln, &cache.norm_input, &up_tokens);

    // norm input = embedded + se(embedded): the gradient reaches the
    // embedding both through the skip and through the SE unit.
    let d_sum = Matrix3::from_tokens(d_norm_input, cache.batch, cache.steps)?;
    let (se_grads, d_embed_via_se) = se_backward(se, &cache.embedded, &d_sum)?;
    let d_embedded = d_sum.add(&d_embed_via_se)?.into_tokens();

    let (embed_grads, d_input_tokens) =
        dense_backward(embed, &cache.input_tokens, Activation::Relu, &d_embedded)?;
    let input_grad = Matrix3::from_tokens(d_input_tokens, cache.batch, cache.steps)?;
    Ok((embed_grads, se_grads, ln_grads, input_grad))
}
