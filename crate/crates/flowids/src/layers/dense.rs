//! Fully-connected layer with an optional elementwise nonlinearity.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matmul, Activation, Matrix2};
use rand::Rng as _;

/// Parameters of a dense layer: `weight` is `(in x out)`, `bias` has length `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Matrix2,
    pub bias: Vec<f64>,
}

impl DenseParams {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseParams {
            weight: Matrix2::from_vec(input, output, data).expect("shape by construction"),
            bias: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        DenseParams {
            weight: Matrix2::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// Gradients with the same shapes as [`DenseParams`].
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weight: Matrix2,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(p: &DenseParams) -> Self {
        DenseGrads {
            weight: Matrix2::zeros(p.weight.rows(), p.weight.cols()),
            bias: vec![0.0; p.bias.len()],
        }
    }
}

fn check_input(op: &'static str, p: &DenseParams, x: &Matrix2) -> Result<()> {
    if x.cols() != p.input_size() {
        return Err(Error::shape(
            op,
            format!(
                "input ({}x{}) vs weight ({}x{})",
                x.rows(),
                x.cols(),
                p.weight.rows(),
                p.weight.cols()
            ),
        ));
    }
    Ok(())
}

/// `act(x . W + b)` with the bias broadcast over rows.
pub fn dense_forward(p: &DenseParams, x: &Matrix2, act: Activation) -> Result<Matrix2> {
    check_input("dense_forward", p, x)?;
    let mut z = matmul(x, &p.weight)?;
    for r in 0..z.rows() {
        for (v, &b) in z.row_mut(r).iter_mut().zip(&p.bias) {
            *v = act.apply(*v + b);
        }
    }
    Ok(z)
}

/// Analytic gradients of [`dense_forward`] given `upstream = dLoss/dOutput`.
/// Returns the parameter gradients and `dLoss/dInput`.
pub fn dense_backward(
    p: &DenseParams,
    x: &Matrix2,
    act: Activation,
    upstream: &Matrix2,
) -> Result<(DenseGrads, Matrix2)> {
    check_input("dense_backward", p, x)?;
    if upstream.rows() != x.rows() || upstream.cols() != p.output_size() {
        return Err(Error::shape(
            "dense_backward",
            format!(
                "upstream ({}x{}) vs expected ({}x{})",
                upstream.rows(),
                upstream.cols(),
                x.rows(),
                p.output_size()
            ),
        ));
    }
    // Recompute the pre-activation, then push the upstream gradient through
    // the nonlinearity: dz = upstream * act'(z).
    let mut dz = matmul(x, &p.weight)?;
    for r in 0..dz.rows() {
        for ((v, &b), &u) in dz.row_mut(r).iter_mut().zip(&p.bias).zip(upstream.row(r)) {
            *v = u * act.derivative(*v + b);
        }
    }
    let weight_grad = matmul(&x.transpose(), &dz)?;
    let bias_grad = dz.col_sums();
    let input_grad = matmul(&dz, &p.weight.transpose())?;
    Ok((
        DenseGrads {
            weight: weight_grad,
            bias: bias_grad,
        },
        input_grad,
    ))
}
