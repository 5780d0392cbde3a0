//! LSTM cell, sequence scan, and the bidirectional wrapper.
//!
//! Gate layout is fixed: the 4H-wide pre-activation splits into
//! `[input, forget, cell, output]` blocks, abbreviated `[i, f, g, o]`.
//! The cell update is the standard one:
//!
//! ```text
//! p      = x_t . Wx + h . Wh + b
//! i,f,o  = sigmoid(p_i), sigmoid(p_f), sigmoid(p_o)
//! g      = tanh(p_g)
//! c'     = f*c + i*g
//! h'     = o * tanh(c')
//! ```
//!
//! The bidirectional form runs one scan forward in time and a second scan on
//! the time-reversed input, then concatenates the hidden states per step
//! (return-sequences behavior).

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matmul, sigmoid, Matrix2, Matrix3};
use rand::Rng as _;

/// One direction's parameters. `input_weights` is `(in x 4H)`,
/// `recurrent_weights` is `(H x 4H)`, `bias` has length `4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_weights: Matrix2,
    pub recurrent_weights: Matrix2,
    pub bias: Vec<f64>,
}

impl LstmParams {
    /// Glorot-uniform weights; zero bias except the forget-gate block, which
    /// starts at 1.0 so early training does not erase the cell state.
    pub fn glorot(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = LstmParams {
            input_weights: glorot_matrix(input, 4 * hidden, rng),
            recurrent_weights: glorot_matrix(hidden, 4 * hidden, rng),
            bias: vec![0.0; 4 * hidden],
        };
        for b in &mut p.bias[hidden..2 * hidden] {
            *b = 1.0;
        }
        p
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input_weights: Matrix2::zeros(input, 4 * hidden),
            recurrent_weights: Matrix2::zeros(hidden, 4 * hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.input_weights.rows() * self.input_weights.cols()
            + self.recurrent_weights.rows() * self.recurrent_weights.cols()
            + self.bias.len()
    }
}

fn glorot_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix2 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Matrix2::from_vec(rows, cols, data).expect("shape by construction")
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub input_weights: Matrix2,
    pub recurrent_weights: Matrix2,
    pub bias: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros_like(p: &LstmParams) -> Self {
        LstmGrads {
            input_weights: Matrix2::zeros(p.input_weights.rows(), p.input_weights.cols()),
            recurrent_weights: Matrix2::zeros(
                p.recurrent_weights.rows(),
                p.recurrent_weights.cols(),
            ),
            bias: vec![0.0; p.bias.len()],
        }
    }
}

/// Gate activations and states saved per step for backpropagation through time.
#[derive(Debug, Clone)]
struct StepCache {
    input_gate: Matrix2,
    forget_gate: Matrix2,
    cell_candidate: Matrix2,
    output_gate: Matrix2,
    cell: Matrix2,
    tanh_cell: Matrix2,
    hidden: Matrix2,
}

/// Cache of a full single-direction scan.
#[derive(Debug, Clone)]
pub struct LstmSeqCache {
    input: Matrix3,
    steps: Vec<StepCache>,
}

fn check_cell_shapes(
    op: &'static str,
    p: &LstmParams,
    x_t: &Matrix2,
    h: &Matrix2,
    c: &Matrix2,
) -> Result<()> {
    let hidden = p.hidden_size();
    if x_t.cols() != p.input_size()
        || h.cols() != hidden
        || c.cols() != hidden
        || h.rows() != x_t.rows()
        || c.rows() != x_t.rows()
    {
        return Err(Error::shape(
            op,
            format!(
                "x ({}x{}), h ({}x{}), c ({}x{}) vs in={} hidden={}",
                x_t.rows(),
                x_t.cols(),
                h.rows(),
                h.cols(),
                c.rows(),
                c.cols(),
                p.input_size(),
                hidden
            ),
        ));
    }
    Ok(())
}

fn gate_preactivations(p: &LstmParams, x_t: &Matrix2, h: &Matrix2) -> Result<Matrix2> {
    let mut pre = matmul(x_t, &p.input_weights)?;
    let rec = matmul(h, &p.recurrent_weights)?;
    for (v, r) in pre.data_mut().iter_mut().zip(rec.data()) {
        *v += r;
    }
    for row in 0..pre.rows() {
        for (v, b) in pre.row_mut(row).iter_mut().zip(&p.bias) {
            *v += b;
        }
    }
    Ok(pre)
}

fn step(p: &LstmParams, x_t: &Matrix2, h: &Matrix2, c: &Matrix2) -> Result<StepCache> {
    let hidden = p.hidden_size();
    let batch = x_t.rows();
    let pre = gate_preactivations(p, x_t, h)?;

    let mut cache = StepCache {
        input_gate: Matrix2::zeros(batch, hidden),
        forget_gate: Matrix2::zeros(batch, hidden),
        cell_candidate: Matrix2::zeros(batch, hidden),
        output_gate: Matrix2::zeros(batch, hidden),
        cell: Matrix2::zeros(batch, hidden),
        tanh_cell: Matrix2::zeros(batch, hidden),
        hidden: Matrix2::zeros(batch, hidden),
    };
    for b in 0..batch {
        for j in 0..hidden {
            let i = sigmoid(pre.get(b, j));
            let f = sigmoid(pre.get(b, hidden + j));
            let g = pre.get(b, 2 * hidden + j).tanh();
            let o = sigmoid(pre.get(b, 3 * hidden + j));
            let c_new = f * c.get(b, j) + i * g;
            let t = c_new.tanh();
            cache.input_gate.set(b, j, i);
            cache.forget_gate.set(b, j, f);
            cache.cell_candidate.set(b, j, g);
            cache.output_gate.set(b, j, o);
            cache.cell.set(b, j, c_new);
            cache.tanh_cell.set(b, j, t);
            cache.hidden.set(b, j, o * t);
        }
    }
    Ok(cache)
}

/// One cell update. Returns `(h', c')`.
pub fn lstm_cell_step(
    p: &LstmParams,
    x_t: &Matrix2,
    h: &Matrix2,
    c: &Matrix2,
) -> Result<(Matrix2, Matrix2)> {
    check_cell_shapes("lstm_cell_step", p, x_t, h, c)?;
    let cache = step(p, x_t, h, c)?;
    Ok((cache.hidden, cache.cell))
}

/// Scan a full sequence in natural time order from zero initial state,
/// returning every step's hidden state `(batch x steps x H)` and the cache
/// needed for [`lstm_backward_seq`].
pub fn lstm_forward_seq(p: &LstmParams, x: &Matrix3) -> Result<(Matrix3, LstmSeqCache)> {
    if x.channels() != p.input_size() {
        return Err(Error::shape(
            "lstm_forward_seq",
            format!(
                "input has {} channels, params expect {}",
                x.channels(),
                p.input_size()
            ),
        ));
    }
    let (batch, steps, hidden) = (x.batch(), x.steps(), p.hidden_size());
    let mut h = Matrix2::zeros(batch, hidden);
    let mut c = Matrix2::zeros(batch, hidden);
    let mut out = Matrix3::zeros(batch, steps, hidden);
    let mut caches = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = step_slice(x, t);
        let cache = step(p, &x_t, &h, &c)?;
        h = cache.hidden.clone();
        c = cache.cell.clone();
        for b in 0..batch {
            for j in 0..hidden {
                out.set(b, t, j, h.get(b, j));
            }
        }
        caches.push(cache);
    }
    Ok((
        out,
        LstmSeqCache {
            input: x.clone(),
            steps: caches,
        },
    ))
}

/// Extract step `t` across the batch as a `(batch x channels)` matrix.
fn step_slice(x: &Matrix3, t: usize) -> Matrix2 {
    let mut out = Matrix2::zeros(x.batch(), x.channels());
    for b in 0..x.batch() {
        out.row_mut(b).copy_from_slice(x.token(b, t));
    }
    out
}

/// Backpropagation through time over a cached scan. `upstream` holds
/// `dLoss/dHidden` for every step; returns parameter gradients and
/// `dLoss/dInput`.
pub fn lstm_backward_seq(
    p: &LstmParams,
    cache: &LstmSeqCache,
    upstream: &Matrix3,
) -> Result<(LstmGrads, Matrix3)> {
    let x = &cache.input;
    let (batch, steps, hidden) = (x.batch(), x.steps(), p.hidden_size());
    if (upstream.batch(), upstream.steps(), upstream.channels()) != (batch, steps, hidden) {
        return Err(Error::shape(
            "lstm_backward_seq",
            format!(
                "upstream ({}x{}x{}) vs expected ({batch}x{steps}x{hidden})",
                upstream.batch(),
                upstream.steps(),
                upstream.channels()
            ),
        ));
    }

    let mut grads = LstmGrads::zeros_like(p);
    let mut input_grad = Matrix3::zeros(batch, steps, x.channels());
    let mut dh_next = Matrix2::zeros(batch, hidden);
    let mut dc_next = Matrix2::zeros(batch, hidden);

    let wx_t = p.input_weights.transpose();
    let wh_t = p.recurrent_weights.transpose();

    for t in (0..steps).rev() {
        let sc = &cache.steps[t];
        let mut gate_pre_grad = Matrix2::zeros(batch, 4 * hidden);
        for b in 0..batch {
            for j in 0..hidden {
                let dh = upstream.get(b, t, j) + dh_next.get(b, j);
                let i = sc.input_gate.get(b, j);
                let f = sc.forget_gate.get(b, j);
                let g = sc.cell_candidate.get(b, j);
                let o = sc.output_gate.get(b, j);
                let tc = sc.tanh_cell.get(b, j);
                let c_prev = if t > 0 {
                    cache.steps[t - 1].cell.get(b, j)
                } else {
                    0.0
                };

                let d_o = dh * tc;
                let d_c = dc_next.get(b, j) + dh * o * (1.0 - tc * tc);
                let d_i = d_c * g;
                let d_g = d_c * i;
                let d_f = d_c * c_prev;
                dc_next.set(b, j, d_c * f);

                gate_pre_grad.set(b, j, d_i * i * (1.0 - i));
                gate_pre_grad.set(b, hidden + j, d_f * f * (1.0 - f));
                gate_pre_grad.set(b, 2 * hidden + j, d_g * (1.0 - g * g));
                gate_pre_grad.set(b, 3 * hidden + j, d_o * o * (1.0 - o));
            }
        }

        let x_t = step_slice(x, t);
        let h_prev = if t > 0 {
            cache.steps[t - 1].hidden.clone()
        } else {
            Matrix2::zeros(batch, hidden)
        };

        let dwx = matmul(&x_t.transpose(), &gate_pre_grad)?;
        let dwh = matmul(&h_prev.transpose(), &gate_pre_grad)?;
        for (a, b) in grads.input_weights.data_mut().iter_mut().zip(dwx.data()) {
            *a += b;
        }
        for (a, b) in grads
            .recurrent_weights
            .data_mut()
            .iter_mut()
            .zip(dwh.data())
        {
            *a += b;
        }
        for (a, b) in grads.bias.iter_mut().zip(gate_pre_grad.col_sums()) {
            *a += b;
        }

        let dx_t = matmul(&gate_pre_grad, &wx_t)?;
        for b in 0..batch {
            for c in 0..x.channels() {
                input_grad.set(b, t, c, dx_t.get(b, c));
            }
        }
        dh_next = matmul(&gate_pre_grad, &wh_t)?;
    }

    Ok((grads, input_grad))
}

/// Reverse the steps axis.
pub fn reverse_time(x: &Matrix3) -> Matrix3 {
    let mut out = Matrix3::zeros(x.batch(), x.steps(), x.channels());
    for b in 0..x.batch() {
        for t in 0..x.steps() {
            let src = x.token(b, x.steps() - 1 - t);
            for (c, &v) in src.iter().enumerate() {
                out.set(b, t, c, v);
            }
        }
    }
    out
}

/// Concatenate along the channel axis.
pub fn concat_channels(a: &Matrix3, b: &Matrix3) -> Result<Matrix3> {
    if a.batch() != b.batch() || a.steps() != b.steps() {
        return Err(Error::shape(
            "concat_channels",
            format!(
                "({}x{}x{}) vs ({}x{}x{})",
                a.batch(),
                a.steps(),
                a.channels(),
                b.batch(),
                b.steps(),
                b.channels()
            ),
        ));
    }
    let mut out = Matrix3::zeros(a.batch(), a.steps(), a.channels() + b.channels());
    for bi in 0..a.batch() {
        for t in 0..a.steps() {
            for (c, &v) in a.token(bi, t).iter().enumerate() {
                out.set(bi, t, c, v);
            }
            for (c, &v) in b.token(bi, t).iter().enumerate() {
                out.set(bi, t, a.channels() + c, v);
            }
        }
    }
    Ok(out)
}

/// Split along the channel axis at `left_channels`.
pub fn split_channels(x: &Matrix3, left_channels: usize) -> Result<(Matrix3, Matrix3)> {
    if left_channels > x.channels() {
        return Err(Error::shape(
            "split_channels",
            format!("cannot take {left_channels} of {} channels", x.channels()),
        ));
    }
    let right_channels = x.channels() - left_channels;
    let mut left = Matrix3::zeros(x.batch(), x.steps(), left_channels);
    let mut right = Matrix3::zeros(x.batch(), x.steps(), right_channels);
    for b in 0..x.batch() {
        for t in 0..x.steps() {
            let tok = x.token(b, t);
            for (c, &v) in tok[..left_channels].iter().enumerate() {
                left.set(b, t, c, v);
            }
            for (c, &v) in tok[left_channels..].iter().enumerate() {
                right.set(b, t, c, v);
            }
        }
    }
    Ok((left, right))
}

/// Both directions of a bidirectional LSTM. They share hidden and input sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub forward_dir: LstmParams,
    pub backward_dir: LstmParams,
}

impl BiLstmParams {
    pub fn glorot(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiLstmParams {
            forward_dir: LstmParams::glorot(input, hidden, rng),
            backward_dir: LstmParams::glorot(input, hidden, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forward_dir.hidden_size()
    }

    pub fn param_count(&self) -> usize {
        self.forward_dir.param_count() + self.backward_dir.param_count()
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmGrads {
    pub forward_dir: LstmGrads,
    pub backward_dir: LstmGrads,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    forward: LstmSeqCache,
    backward: LstmSeqCache,
}

/// Full-sequence bidirectional scan. `seq[b,t,:]` is the forward hidden state
/// at `t` concatenated with the backward-direction hidden state produced when
/// the reverse scan visits `t`; output is `(batch x steps x 2H)`.
pub fn bilstm_forward(p: &BiLstmParams, x: &Matrix3) -> Result<(Matrix3, BiLstmCache)> {
    let (fwd_seq, fwd_cache) = lstm_forward_seq(&p.forward_dir, x)?;
    let (bwd_seq_rev, bwd_cache) = lstm_forward_seq(&p.backward_dir, &reverse_time(x))?;
    let bwd_seq = reverse_time(&bwd_seq_rev);
    let seq = concat_channels(&fwd_seq, &bwd_seq)?;
    Ok((
        seq,
        BiLstmCache {
            forward: fwd_cache,
            backward: bwd_cache,
        },
    ))
}

/// Exact BPTT through both directions.
pub fn bilstm_backward(
    p: &BiLstmParams,
    cache: &BiLstmCache,
    upstream: &Matrix3,
) -> Result<(BiLstmGrads, Matrix3)> {
    let hidden = p.hidden_size();
    let (up_fwd, up_bwd) = split_channels(upstream, hidden)?;
    let (fwd_grads, fwd_dx) = lstm_backward_seq(&p.forward_dir, &cache.forward, &up_fwd)?;
    let (bwd_grads, bwd_dx_rev) =
        lstm_backward_seq(&p.backward_dir, &cache.backward, &reverse_time(&up_bwd))?;
    let input_grad = fwd_dx.add(&reverse_time(&bwd_dx_rev))?;
    Ok((
        BiLstmGrads {
            forward_dir: fwd_grads,
            backward_dir: bwd_grads,
        },
        input_grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::grad_check;

    fn random_mat3(batch: usize, steps: usize, channels: usize, seed: u64) -> Matrix3 {
        let mut r = rng::seeded(seed);
        Matrix3::from_vec(
            batch,
            steps,
            channels,
            (0..batch * steps * channels)
                .map(|_| r.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    /// Scalar-loop LSTM oracle: one step, no matrix calls.
    fn cell_oracle(p: &LstmParams, x_t: &Matrix2, h: &Matrix2, c: &Matrix2) -> (Matrix2, Matrix2) {
        let hidden = p.hidden_size();
        let batch = x_t.rows();
        let mut h_new = Matrix2::zeros(batch, hidden);
        let mut c_new = Matrix2::zeros(batch, hidden);
        for b in 0..batch {
            for j in 0..hidden {
                let pre = |col: usize| {
                    let mut acc = p.bias[col];
                    for k in 0..x_t.cols() {
                        acc += x_t.get(b, k) * p.input_weights.get(k, col);
                    }
                    for k in 0..hidden {
                        acc += h.get(b, k) * p.recurrent_weights.get(k, col);
                    }
                    acc
                };
                let i = sigmoid(pre(j));
                let f = sigmoid(pre(hidden + j));
                let g = pre(2 * hidden + j).tanh();
                let o = sigmoid(pre(3 * hidden + j));
                let cv = f * c.get(b, j) + i * g;
                c_new.set(b, j, cv);
                h_new.set(b, j, o * cv.tanh());
            }
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(2, 3);
        let x = Matrix2::from_rows(&[vec![1.0, -1.0]]);
        let h = Matrix2::from_rows(&[vec![0.3, 0.4, 0.5]]);
        let c = Matrix2::from_rows(&[vec![1.0, 2.0, 3.0]]);
        // i = 0.5, f = 0, g = tanh(0) = 0, so c' = 0 and h' = 0.
        let (h2, c2) = lstm_cell_step(&p, &x, &h, &Matrix2::zeros(1, 3)).unwrap();
        assert!(h2.data().iter().all(|&v| v == 0.0));
        assert!(c2.data().iter().all(|&v| v == 0.0));
        // Even with nonzero incoming cell state, f = sigmoid(0) halves it and
        // nothing else contributes.
        let (_, c3) = lstm_cell_step(&p, &x, &h, &c).unwrap();
        for (got, want) in c3.data().iter().zip(c.data()) {
            assert_eq!(*got, 0.5 * want);
        }
    }

    #[test]
    fn saturated_forget_gate_carries_cell_through() {
        let mut p = LstmParams::zeros(1, 2);
        for b in &mut p.bias[2..4] {
            *b = 20.0;
        }
        let x = Matrix2::from_rows(&[vec![0.7]]);
        let h = Matrix2::zeros(1, 2);
        let c = Matrix2::from_rows(&[vec![0.9, -1.4]]);
        let (_, c2) = lstm_cell_step(&p, &x, &h, &c).unwrap();
        for (got, want) in c2.data().iter().zip(c.data()) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn cell_step_matches_scalar_oracle() {
        for seed in 0..10u64 {
            let mut r = rng::seeded(seed + 30);
            let p = LstmParams::glorot(3, 4, &mut r);
            let x = step_slice(&random_mat3(2, 1, 3, seed), 0);
            let h = step_slice(&random_mat3(2, 1, 4, seed + 500), 0);
            let c = step_slice(&random_mat3(2, 1, 4, seed + 600), 0);
            let (h_got, c_got) = lstm_cell_step(&p, &x, &h, &c).unwrap();
            let (h_want, c_want) = cell_oracle(&p, &x, &h, &c);
            for (a, b) in h_got.data().iter().zip(h_want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in c_got.data().iter().zip(c_want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bilstm_output_shape_is_twice_hidden() {
        let mut r = rng::seeded(8);
        let p = BiLstmParams::glorot(1, 32, &mut r);
        let x = random_mat3(2, 60, 1, 9);
        let (seq, _) = bilstm_forward(&p, &x).unwrap();
        assert_eq!(seq.batch(), 2);
        assert_eq!(seq.steps(), 60);
        assert_eq!(seq.channels(), 64);
        assert_eq!(seq.data().len(), 2 * 3840);
    }

    #[test]
    fn backward_half_equals_reversed_forward_scan() {
        let mut r = rng::seeded(12);
        let p = BiLstmParams::glorot(2, 3, &mut r);
        let x = random_mat3(2, 5, 2, 13);
        let (seq, _) = bilstm_forward(&p, &x).unwrap();
        let (_, bwd_half) = split_channels(&seq, 3).unwrap();

        let (ref_scan, _) = lstm_forward_seq(&p.backward_dir, &reverse_time(&x)).unwrap();
        let want = reverse_time(&ref_scan);
        assert_eq!(bwd_half, want); // bit-exact by construction
    }

    #[test]
    fn sequence_scan_matches_scalar_oracle() {
        for seed in 0..10u64 {
            let mut r = rng::seeded(seed + 40);
            let p = BiLstmParams::glorot(1, 2, &mut r);
            let x = random_mat3(2, 3, 1, seed + 800);
            let (seq, _) = bilstm_forward(&p, &x).unwrap();

            // Step-by-step oracle for both directions.
            for b in 0..2 {
                let mut h = Matrix2::zeros(1, 2);
                let mut c = Matrix2::zeros(1, 2);
                for t in 0..3 {
                    let x_t = Matrix2::from_rows(&[x.token(b, t).to_vec()]);
                    let (h2, c2) = cell_oracle(&p.forward_dir, &x_t, &h, &c);
                    h = h2;
                    c = c2;
                    for j in 0..2 {
                        assert!((seq.get(b, t, j) - h.get(0, j)).abs() < 1e-12);
                    }
                }
                let mut h = Matrix2::zeros(1, 2);
                let mut c = Matrix2::zeros(1, 2);
                for t in (0..3).rev() {
                    let x_t = Matrix2::from_rows(&[x.token(b, t).to_vec()]);
                    let (h2, c2) = cell_oracle(&p.backward_dir, &x_t, &h, &c);
                    h = h2;
                    c = c2;
                    for j in 0..2 {
                        assert!((seq.get(b, t, 2 + j) - h.get(0, j)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut r = rng::seeded(21);
        let p = BiLstmParams::glorot(2, 3, &mut r);
        let x = random_mat3(2, 4, 2, 22);
        let (_, cache) = bilstm_forward(&p, &x).unwrap();
        let (grads, dx) = bilstm_backward(&p, &cache, &Matrix3::zeros(2, 4, 6)).unwrap();
        assert!(grads
            .forward_dir
            .input_weights
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(grads
            .backward_dir
            .recurrent_weights
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    fn pack_lstm(p: &LstmParams, out: &mut Vec<f64>) {
        out.extend(p.input_weights.data());
        out.extend(p.recurrent_weights.data());
        out.extend(&p.bias);
    }

    fn unpack_lstm(v: &[f64], input: usize, hidden: usize) -> (LstmParams, usize) {
        let wx = input * 4 * hidden;
        let wh = hidden * 4 * hidden;
        let p = LstmParams {
            input_weights: Matrix2::from_vec(input, 4 * hidden, v[..wx].to_vec()).unwrap(),
            recurrent_weights: Matrix2::from_vec(hidden, 4 * hidden, v[wx..wx + wh].to_vec())
                .unwrap(),
            bias: v[wx + wh..wx + wh + 4 * hidden].to_vec(),
        };
        (p, wx + wh + 4 * hidden)
    }

    fn bilstm_fd_check(steps: usize, hidden: usize, seed: u64) -> f64 {
        let input = 2;
        let batch = 2;
        let mut r = rng::seeded(seed);
        let p = BiLstmParams::glorot(input, hidden, &mut r);
        let x = random_mat3(batch, steps, input, seed + 1000);
        let u = random_mat3(batch, steps, 2 * hidden, seed + 2000);

        let (_, cache) = bilstm_forward(&p, &x).unwrap();
        let (grads, dx) = bilstm_backward(&p, &cache, &u).unwrap();

        let mut theta = Vec::new();
        pack_lstm(&p.forward_dir, &mut theta);
        pack_lstm(&p.backward_dir, &mut theta);
        theta.extend(x.data());
        let mut analytic = Vec::new();
        pack_lstm(
            &LstmParams {
                input_weights: grads.forward_dir.input_weights.clone(),
                recurrent_weights: grads.forward_dir.recurrent_weights.clone(),
                bias: grads.forward_dir.bias.clone(),
            },
            &mut analytic,
        );
        pack_lstm(
            &LstmParams {
                input_weights: grads.backward_dir.input_weights.clone(),
                recurrent_weights: grads.backward_dir.recurrent_weights.clone(),
                bias: grads.backward_dir.bias.clone(),
            },
            &mut analytic,
        );
        analytic.extend(dx.data());

        let loss = |v: &[f64]| {
            let (fwd, used) = unpack_lstm(v, input, hidden);
            let (bwd, used2) = unpack_lstm(&v[used..], input, hidden);
            let xx = Matrix3::from_vec(batch, steps, input, v[used + used2..].to_vec()).unwrap();
            let pp = BiLstmParams {
                forward_dir: fwd,
                backward_dir: bwd,
            };
            let (seq, _) = bilstm_forward(&pp, &xx).unwrap();
            seq.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
        };
        grad_check(loss, &theta, &analytic, 1e-5).unwrap()
    }

    #[test]
    fn single_step_backward_matches_finite_differences() {
        for seed in 0..10u64 {
            let err = bilstm_fd_check(1, 3, seed + 60);
            assert!(err < 1e-4, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn multi_step_backward_matches_finite_differences() {
        for seed in 0..10u64 {
            let err = bilstm_fd_check(4, 3, seed + 90);
            assert!(err < 1e-4, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = LstmParams::zeros(2, 3);
        let x = Matrix3::zeros(1, 4, 5);
        assert!(lstm_forward_seq(&p, &x).is_err());
    }
}
