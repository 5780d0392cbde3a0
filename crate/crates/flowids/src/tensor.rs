//! Dense f64 kernel: the two array types every other module computes with,
//! the primitive forward operations, and the finite-difference gradient
//! checker used to verify every hand-derived backward pass.
//!
//! Everything is float64. Matrices are row-major `Vec<f64>` with no stride
//! tricks; at this problem scale (sequences of at most 83 steps, channel
//! widths of at most 128) plain dense loops are both the simplest and the
//! fastest option.

use crate::error::{Error, Result};

/// Dense 2-D matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix2::from_vec",
                format!("data length {} != {rows}x{cols}", data.len()),
            ));
        }
        Ok(Matrix2 { rows, cols, data })
    }

    /// Build from nested rows; handy in tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix2 {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix2::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix2 {
        let mut out = Matrix2::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix2 {
        Matrix2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Matrix2) -> Result<Matrix2> {
        self.zip_with("Matrix2::add", other, |a, b| a + b)
    }

    /// Elementwise (Hadamard) product; shapes must match.
    pub fn hadamard(&self, other: &Matrix2) -> Result<Matrix2> {
        self.zip_with("Matrix2::hadamard", other, |a, b| a * b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Matrix2,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix2> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                op,
                format!(
                    "({}x{}) vs ({}x{})",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        Ok(Matrix2 {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Sum of each column, as a vector of length `cols`.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense batched 3-D array: `batch` instances, each `steps x channels`,
/// stored contiguously so a `Matrix3` reinterprets as a `(batch*steps) x
/// channels` `Matrix2` without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix3 {
    batch: usize,
    steps: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Matrix3 {
    pub fn zeros(batch: usize, steps: usize, channels: usize) -> Self {
        Matrix3 {
            batch,
            steps,
            channels,
            data: vec![0.0; batch * steps * channels],
        }
    }

    pub fn from_vec(batch: usize, steps: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * steps * channels {
            return Err(Error::shape(
                "Matrix3::from_vec",
                format!("data length {} != {batch}x{steps}x{channels}", data.len()),
            ));
        }
        Ok(Matrix3 {
            batch,
            steps,
            channels,
            data,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, b: usize, t: usize, c: usize) -> f64 {
        self.data[(b * self.steps + t) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, b: usize, t: usize, c: usize, v: f64) {
        self.data[(b * self.steps + t) * self.channels + c] = v;
    }

    /// The channel vector at one (batch, step) position.
    #[inline]
    pub fn token(&self, b: usize, t: usize) -> &[f64] {
        let start = (b * self.steps + t) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Reinterpret as `(batch*steps) x channels` without copying.
    pub fn into_tokens(self) -> Matrix2 {
        Matrix2 {
            rows: self.batch * self.steps,
            cols: self.channels,
            data: self.data,
        }
    }

    /// Inverse of [`Matrix3::into_tokens`].
    pub fn from_tokens(m: Matrix2, batch: usize, steps: usize) -> Result<Self> {
        if m.rows != batch * steps {
            return Err(Error::shape(
                "Matrix3::from_tokens",
                format!("{} rows cannot split into {batch}x{steps}", m.rows),
            ));
        }
        Ok(Matrix3 {
            batch,
            steps,
            channels: m.cols,
            data: m.data,
        })
    }

    /// Flatten each instance to a single row of length `steps*channels`.
    pub fn flatten_instances(self) -> Matrix2 {
        Matrix2 {
            rows: self.batch,
            cols: self.steps * self.channels,
            data: self.data,
        }
    }

    /// Inverse of [`Matrix3::flatten_instances`].
    pub fn from_flat(m: Matrix2, steps: usize, channels: usize) -> Result<Self> {
        if m.cols != steps * channels {
            return Err(Error::shape(
                "Matrix3::from_flat",
                format!("{} cols cannot split into {steps}x{channels}", m.cols),
            ));
        }
        Ok(Matrix3 {
            batch: m.rows,
            steps,
            channels,
            data: m.data,
        })
    }

    pub fn add(&self, other: &Matrix3) -> Result<Matrix3> {
        if (self.batch, self.steps, self.channels) != (other.batch, other.steps, other.channels) {
            return Err(Error::shape(
                "Matrix3::add",
                format!(
                    "({}x{}x{}) vs ({}x{}x{})",
                    self.batch, self.steps, self.channels, other.batch, other.steps, other.channels
                ),
            ));
        }
        Ok(Matrix3 {
            batch: self.batch,
            steps: self.steps,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }
}

/// Elementwise nonlinearity selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    /// Pass-through (no nonlinearity).
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed in terms of the pre-activation value.
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Standard matrix product. Errors if the inner dimensions disagree.
pub fn matmul(a: &Matrix2, b: &Matrix2) -> Result<Matrix2> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "matmul",
            format!("({}x{}) * ({}x{})", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = Matrix2::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Elementwise activation over a matrix.
pub fn activation(x: &Matrix2, kind: Activation) -> Matrix2 {
    x.map(|v| kind.apply(v))
}

/// Row-wise softmax with max-subtraction for stability. Every output row
/// sums to 1 and all entries lie in (0, 1).
pub fn softmax_rows(x: &Matrix2) -> Matrix2 {
    let mut out = x.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Per-row layer normalization: `(x - mean) / sqrt(var + eps) * gain + bias`,
/// with the population variance over the row.
pub fn layer_norm(x: &Matrix2, gain: &[f64], bias: &[f64], eps: f64) -> Matrix2 {
    assert_eq!(gain.len(), x.cols, "layer_norm: gain length != cols");
    assert_eq!(bias.len(), x.cols, "layer_norm: bias length != cols");
    assert!(eps > 0.0, "layer_norm: eps must be positive");
    let mut out = x.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let (mean, var) = mean_var(row);
        let inv = 1.0 / (var + eps).sqrt();
        for (v, (&g, &b)) in row.iter_mut().zip(gain.iter().zip(bias)) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    out
}

/// Mean and population variance of a slice.
pub fn mean_var(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Mean over the steps axis: `(batch x steps x channels)` to `(batch x channels)`.
pub fn global_avg_pool_tokens(x: &Matrix3) -> Result<Matrix2> {
    if x.steps == 0 {
        return Err(Error::shape(
            "global_avg_pool_tokens",
            "zero steps".to_string(),
        ));
    }
    let mut out = Matrix2::zeros(x.batch, x.channels);
    for b in 0..x.batch {
        let out_row = out.row_mut(b);
        for t in 0..x.steps {
            for (o, &v) in out_row.iter_mut().zip(x.token(b, t)) {
                *o += v;
            }
        }
        for o in out_row.iter_mut() {
            *o /= x.steps as f64;
        }
    }
    Ok(out)
}

/// Central-finite-difference check of an analytic gradient.
///
/// Evaluates `f` at `x0 ± step` along every coordinate and returns the worst
/// relative disagreement
/// `max_i |g_num,i - g_ana,i| / max(1e-8, |g_num,i| + |g_ana,i|)`.
pub fn grad_check<F>(mut f: F, x0: &[f64], analytic: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        x0.len(),
        analytic.len(),
        "grad_check: gradient length mismatch"
    );
    assert!(step > 0.0, "grad_check: step must be positive");
    let mut x = x0.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let f_plus = f(&x);
        x[i] = orig - step;
        let f_minus = f(&x);
        x[i] = orig;
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(Error::Numeric(format!(
                "grad_check: non-finite evaluation at coordinate {i}"
            )));
        }
        let numeric = (f_plus - f_minus) / (2.0 * step);
        let rel = (numeric - analytic[i]).abs() / f64::max(1e-8, numeric.abs() + analytic[i].abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
