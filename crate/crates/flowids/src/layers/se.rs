//! Squeeze-and-excitation channel attention.
//!
//! The squeeze step pools each channel over the token axis; the excitation
//! step runs the pooled vector through a two-layer bottleneck (relu, then
//! sigmoid) and rescales every token of the input by the resulting per-channel
//! gate in (0, 1).

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{global_avg_pool_tokens, Activation, Matrix2, Matrix3};

use super::dense::{dense_backward, dense_forward, DenseGrads, DenseParams};

/// Bottleneck parameters: `reduce` maps `C -> max(1, C/ratio)`, `expand` maps
/// back to `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeParams {
    pub reduce: DenseParams,
    pub expand: DenseParams,
    pub ratio: usize,
}

impl SeParams {
    pub fn glorot(channels: usize, ratio: usize, rng: &mut Rng) -> Self {
        let mid = Self::reduced_width(channels, ratio);
        SeParams {
            reduce: DenseParams::glorot(channels, mid, rng),
            expand: DenseParams::glorot(mid, channels, rng),
            ratio,
        }
    }

    pub fn zeros(channels: usize, ratio: usize) -> Self {
        let mid = Self::reduced_width(channels, ratio);
        SeParams {
            reduce: DenseParams::zeros(channels, mid),
            expand: DenseParams::zeros(mid, channels),
            ratio,
        }
    }

    /// Bottleneck width `C/ratio`, floored at 1 so tiny channel counts stay valid.
    pub fn reduced_width(channels: usize, ratio: usize) -> usize {
        (channels / ratio).max(1)
    }

    pub fn channels(&self) -> usize {
        self.reduce.input_size()
    }

    pub fn param_count(&self) -> usize {
        self.reduce.param_count() + self.expand.param_count()
    }
}

#[derive(Debug, Clone)]
pub struct SeGrads {
    pub reduce: DenseGrads,
    pub expand: DenseGrads,
}

fn check_channels(op: &'static str, p: &SeParams, x: &Matrix3) -> Result<()> {
    if x.channels() != p.channels() {
        return Err(Error::shape(
            op,
            format!(
                "input has {} channels, params expect {}",
                x.channels(),
                p.channels()
            ),
        ));
    }
    Ok(())
}

/// Forward pass. Returns the rescaled tensor and the `(batch x channels)`
/// gate matrix (every entry strictly inside (0, 1)).
pub fn se_forward(p: &SeParams, x: &Matrix3) -> Result<(Matrix3, Matrix2)> {
    check_channels("se_forward", p, x)?;
    let pooled = global_avg_pool_tokens(x)?;
    let hidden = dense_forward(&p.reduce, &pooled, Activation::Relu)?;
    let gates = dense_forward(&p.expand, &hidden, Activation::Sigmoid)?;
    let mut y = x.clone();
    for b in 0..y.batch() {
        for t in 0..y.steps() {
            for c in 0..y.channels() {
                y.set(b, t, c, x.get(b, t, c) * gates.get(b, c));
            }
        }
    }
    Ok((y, gates))
}

/// Analytic gradients of [`se_forward`], including the path from the output
/// back through the gates into the input.
pub fn se_backward(p: &SeParams, x: &Matrix3, upstream: &Matrix3) -> Result<(SeGrads, Matrix3)> {
    check_channels("se_backward", p, x)?;
    if (upstream.batch(), upstream.steps(), upstream.channels())
        != (x.batch(), x.steps(), x.channels())
    {
        return Err(Error::shape(
            "se_backward",
            format!(
                "upstream ({}x{}x{}) vs input ({}x{}x{})",
                upstream.batch(),
                upstream.steps(),
                upstream.channels(),
                x.batch(),
                x.steps(),
                x.channels()
            ),
        ));
    }

    // Recompute the forward intermediates.
    let pooled = global_avg_pool_tokens(x)?;
    let hidden = dense_forward(&p.reduce, &pooled, Activation::Relu)?;
    let gates = dense_forward(&p.expand, &hidden, Activation::Sigmoid)?;

    // Direct path: dx = upstream * z; gate path: dz[b,c] = sum_t upstream * x.
    let mut input_grad = upstream.clone();
    let mut gate_grad = Matrix2::zeros(x.batch(), x.channels());
    for b in 0..x.batch() {
        for t in 0..x.steps() {
            for c in 0..x.channels() {
                let u = upstream.get(b, t, c);
                input_grad.set(b, t, c, u * gates.get(b, c));
                gate_grad.set(b, c, gate_grad.get(b, c) + u * x.get(b, t, c));
            }
        }
    }

    // Through the two dense maps. dense_backward re-derives the sigmoid/relu
    // local slopes from the same inputs used in the forward pass.
    let (expand_grads, hidden_grad) =
        dense_backward(&p.expand, &hidden, Activation::Sigmoid, &gate_grad)?;
    let (reduce_grads, pooled_grad) =
        dense_backward(&p.reduce, &pooled, Activation::Relu, &hidden_grad)?;

    // Pooling backward: each token receives ds/steps.
    let steps = x.steps() as f64;
    for b in 0..x.batch() {
        for t in 0..x.steps() {
            for c in 0..x.channels() {
                let v = input_grad.get(b, t, c) + pooled_grad.get(b, c) / steps;
                input_grad.set(b, t, c, v);
            }
        }
    }

    Ok((
        SeGrads {
            reduce: reduce_grads,
            expand: expand_grads,
        },
        input_grad,
    ))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::{grad_check, sigmoid};
    use rand::Rng as _;

    fn random_mat3(batch: usize, steps: usize, channels: usize, seed: u64) -> Matrix3 {
        let mut r = rng::seeded(seed);
        Matrix3::from_vec(
            batch,
            steps,
            channels,
            (0..batch * steps * channels)
                .map(|_| r.random_range(-1.5..1.5))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_excitation_params_gate_at_half() {
        let p = SeParams::zeros(4, 2);
        let x = random_mat3(2, 3, 4, 1);
        let (y, gates) = se_forward(&p, &x).unwrap();
        assert!(gates.data().iter().all(|&g| g == 0.5));
        for (yv, xv) in y.data().iter().zip(x.data()) {
            assert_eq!(*yv, 0.5 * xv);
        }
    }

    #[test]
    fn zero_channel_stays_zero() {
        let mut r = rng::seeded(2);
        let p = SeParams::glorot(3, 2, &mut r);
        let mut x = random_mat3(2, 4, 3, 3);
        for b in 0..2 {
            for t in 0..4 {
                x.set(b, t, 1, 0.0);
            }
        }
        let (y, _) = se_forward(&p, &x).unwrap();
        for b in 0..2 {
            for t in 0..4 {
                assert_eq!(y.get(b, t, 1), 0.0);
            }
        }
    }

    #[test]
    fn gates_shrink_magnitudes() {
        let mut r = rng::seeded(9);
        let p = SeParams::glorot(4, 4, &mut r);
        let x = random_mat3(2, 5, 4, 10);
        let (y, gates) = se_forward(&p, &x).unwrap();
        assert!(gates.data().iter().all(|&g| g > 0.0 && g < 1.0));
        for (yv, xv) in y.data().iter().zip(x.data()) {
            if *xv != 0.0 {
                assert!(yv.abs() < xv.abs());
            }
        }
    }

    #[test]
    fn forward_matches_explicit_loop_oracle() {
        for seed in 0..10u64 {
            let mut r = rng::seeded(seed + 20);
            let p = SeParams::glorot(5, 2, &mut r);
            let x = random_mat3(3, 4, 5, seed + 200);
            let (y, _) = se_forward(&p, &x).unwrap();

            // Straight-line recomputation: pool, two affine maps, sigmoid, scale.
            let mid = SeParams::reduced_width(5, 2);
            for b in 0..3 {
                let mut pooled = [0.0; 5];
                for t in 0..4 {
                    for c in 0..5 {
                        pooled[c] += x.get(b, t, c) / 4.0;
                    }
                }
                let mut h = vec![0.0; mid];
                for (j, hv) in h.iter_mut().enumerate() {
                    let mut acc = p.reduce.bias[j];
                    for (c, &pv) in pooled.iter().enumerate() {
                        acc += pv * p.reduce.weight.get(c, j);
                    }
                    *hv = acc.max(0.0);
                }
                let mut z = [0.0; 5];
                for (c, zv) in z.iter_mut().enumerate() {
                    let mut acc = p.expand.bias[c];
                    for (j, &hv) in h.iter().enumerate() {
                        acc += hv * p.expand.weight.get(j, c);
                    }
                    *zv = sigmoid(acc);
                }
                for t in 0..4 {
                    for c in 0..5 {
                        let want = x.get(b, t, c) * z[c];
                        assert!((y.get(b, t, c) - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut r = rng::seeded(5);
        let p = SeParams::glorot(3, 2, &mut r);
        let x = random_mat3(2, 3, 3, 6);
        let upstream = Matrix3::zeros(2, 3, 3);
        let (grads, dx) = se_backward(&p, &x, &upstream).unwrap();
        assert!(grads.reduce.weight.data().iter().all(|&v| v == 0.0));
        assert!(grads.expand.weight.data().iter().all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_case_matches_hand_derived_chain_rule() {
        // One channel, one token, ratio 1. Forward:
        //   s = x; v1 = w1*s + b1; u = relu(v1); v2 = w2*u + b2; z = sigmoid(v2)
        //   y = x*z
        // Hand chain rule for upstream g:
        //   dz  = g*x
        //   dv2 = dz * z*(1-z);  dw2 = u*dv2;  db2 = dv2
        //   du  = w2*dv2;        dv1 = du (v1 > 0)
        //   dw1 = s*dv1;         db1 = dv1
        //   dx  = g*z + w1*dv1
        let (x, w1, b1, w2, b2, g) = (0.8, 0.5, 0.1, -0.7, 0.2, 1.3);
        let p = SeParams {
            reduce: DenseParams {
                weight: Matrix2::from_rows(&[vec![w1]]),
                bias: vec![b1],
            },
            expand: DenseParams {
                weight: Matrix2::from_rows(&[vec![w2]]),
                bias: vec![b2],
            },
            ratio: 1,
        };
        let xs = Matrix3::from_vec(1, 1, 1, vec![x]).unwrap();
        let us = Matrix3::from_vec(1, 1, 1, vec![g]).unwrap();
        let (grads, dx) = se_backward(&p, &xs, &us).unwrap();

        let v1 = w1 * x + b1;
        let u = v1.max(0.0);
        let v2 = w2 * u + b2;
        let z = sigmoid(v2);
        let dz = g * x;
        let dv2 = dz * z * (1.0 - z);
        let dv1 = if v1 > 0.0 { w2 * dv2 } else { 0.0 };
        assert!((grads.expand.weight.get(0, 0) - u * dv2).abs() < 1e-15);
        assert!((grads.expand.bias[0] - dv2).abs() < 1e-15);
        assert!((grads.reduce.weight.get(0, 0) - x * dv1).abs() < 1e-15);
        assert!((grads.reduce.bias[0] - dv1).abs() < 1e-15);
        assert!((dx.get(0, 0, 0) - (g * z + w1 * dv1)).abs() < 1e-15);
    }

    #[test]
    fn backward_passes_finite_difference_check() {
        for seed in 0..10u64 {
            let mut r = rng::seeded(seed + 70);
            let p = SeParams::glorot(4, 2, &mut r);
            let x = random_mat3(2, 3, 4, seed + 700);
            let u = random_mat3(2, 3, 4, seed + 900);
            let (grads, dx) = se_backward(&p, &x, &u).unwrap();

            let mid = SeParams::reduced_width(4, 2);
            let mut theta: Vec<f64> = p.reduce.weight.data().to_vec();
            theta.extend(&p.reduce.bias);
            theta.extend(p.expand.weight.data());
            theta.extend(&p.expand.bias);
            theta.extend(x.data());
            let mut analytic: Vec<f64> = grads.reduce.weight.data().to_vec();
            analytic.extend(&grads.reduce.bias);
            analytic.extend(grads.expand.weight.data());
            analytic.extend(&grads.expand.bias);
            analytic.extend(dx.data());

            let loss = |v: &[f64]| {
                let mut at = 0;
                let mut take = |n: usize| {
                    let s = &v[at..at + n];
                    at += n;
                    s.to_vec()
                };
                let pp = SeParams {
                    reduce: DenseParams {
                        weight: Matrix2::from_vec(4, mid, take(4 * mid)).unwrap(),
                        bias: take(mid),
                    },
                    expand: DenseParams {
                        weight: Matrix2::from_vec(mid, 4, take(mid * 4)).unwrap(),
                        bias: take(4),
                    },
                    ratio: 2,
                };
                let xx = Matrix3::from_vec(2, 3, 4, take(24)).unwrap();
                let (y, _) = se_forward(&pp, &xx).unwrap();
                y.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
            };
            let err = grad_check(loss, &theta, &analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let p = SeParams::zeros(4, 2);
        let x = Matrix3::zeros(1, 2, 3);
        assert!(se_forward(&p, &x).is_err());
    }
}
