//! Model assembly: the four architecture variants, the ordered parameter
//! registry the trainer and weights file work against, and forward/backward
//! passes composed from [`crate::layers`].
//!
//! All variants share the same building blocks:
//!
//! - a token block (dense embedding, squeeze-excitation, residual, layer norm)
//! - a bidirectional LSTM returning the full hidden sequence
//! - a softmax classification head over the flattened features
//!
//! The variants differ only in wiring: the two branches run in parallel and
//! are fused by concatenation, or one branch feeds the other sequentially.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{
    bilstm_backward, bilstm_forward, concat_features, dense_backward, dense_forward,
    split_features, vit_se_block_backward, vit_se_block_forward, BiLstmCache, BiLstmGrads,
    BiLstmParams, DenseGrads, DenseParams, LayerNormGrads, LayerNormParams, LstmParams, SeGrads,
    SeParams, VitBlockCache,
};
use crate::rng::Rng;
use crate::tensor::{softmax_rows, Activation, Matrix2, Matrix3};

/// The four architecture variants of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// #1: token-block output fed to the BiLSTM as a sequence.
    SeqVitThenBilstm,
    /// #2: BiLSTM sequence fed to the token block as tokens.
    SeqBilstmThenVit,
    /// #3: both branches on the raw input, fused by concatenation (H = 32).
    ParallelH32,
    /// #4: as #3 with H = 64.
    ParallelH64,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SeqVitThenBilstm,
        Variant::SeqBilstmThenVit,
        Variant::ParallelH32,
        Variant::ParallelH64,
    ];

    /// Row number in the ablation table (1-based).
    pub fn index(self) -> usize {
        match self {
            Variant::SeqVitThenBilstm => 1,
            Variant::SeqBilstmThenVit => 2,
            Variant::ParallelH32 => 3,
            Variant::ParallelH64 => 4,
        }
    }

    pub fn from_index(index: usize) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.index() == index)
            .ok_or_else(|| Error::Config(format!("variant index {index} not in 1..=4")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::SeqVitThenBilstm => "vit->bilstm32",
            Variant::SeqBilstmThenVit => "bilstm32->vit",
            Variant::ParallelH32 => "vit||bilstm32",
            Variant::ParallelH64 => "vit||bilstm64",
        }
    }

    /// Hidden width the variant is defined with.
    pub fn default_hidden(self) -> usize {
        match self {
            Variant::ParallelH64 => 64,
            _ => 32,
        }
    }
}

/// Architecture hyperparameters. `steps` is the token/time length (one step
/// per selected flow feature); `input_channels` is 1 for flat flow records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub steps: usize,
    pub input_channels: usize,
    pub embed_dim: usize,
    pub se_ratio: usize,
    pub hidden: usize,
    pub n_classes: usize,
}

impl ModelSpec {
    /// Spec with the defaults: single input channel, 32-wide embedding,
    /// squeeze ratio 4, hidden width fixed by the variant.
    pub fn new(variant: Variant, steps: usize, n_classes: usize) -> Self {
        ModelSpec {
            variant,
            steps,
            input_channels: 1,
            embed_dim: 32,
            se_ratio: 4,
            hidden: variant.default_hidden(),
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steps", self.steps),
            ("input_channels", self.input_channels),
            ("embed_dim", self.embed_dim),
            ("se_ratio", self.se_ratio),
            ("hidden", self.hidden),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!(
                    "model spec field `{name}` must be >= 1"
                )));
            }
        }
        if self.n_classes < 2 {
            return Err(Error::Config(
                "model spec field `n_classes` must be >= 2".to_string(),
            ));
        }
        match self.variant {
            Variant::ParallelH32 if self.hidden != 32 => Err(Error::Config(
                "model spec field `hidden` must be 32 for the parallel-H32 variant".to_string(),
            )),
            Variant::ParallelH64 if self.hidden != 64 => Err(Error::Config(
                "model spec field `hidden` must be 64 for the parallel-H64 variant".to_string(),
            )),
            _ => Ok(()),
        }
    }

    /// Channel width entering the token block's embedding.
    pub fn embed_input(&self) -> usize {
        match self.variant {
            Variant::SeqBilstmThenVit => 2 * self.hidden,
            _ => self.input_channels,
        }
    }

    /// Channel width entering the BiLSTM.
    pub fn bilstm_input(&self) -> usize {
        match self.variant {
            Variant::SeqVitThenBilstm => self.embed_dim,
            _ => self.input_channels,
        }
    }

    /// Width of the fused feature vector entering the head.
    pub fn head_input(&self) -> usize {
        let vit_width = self.steps * self.embed_dim;
        let bilstm_width = self.steps * 2 * self.hidden;
        match self.variant {
            Variant::ParallelH32 | Variant::ParallelH64 => vit_width + bilstm_width,
            Variant::SeqVitThenBilstm => bilstm_width,
            Variant::SeqBilstmThenVit => vit_width,
        }
    }
}

/// A built model: the spec plus every parameter tensor.
///
/// The registry order is fixed and documented by [`Model::tensors`]; the
/// trainer's flat parameter vector, the gradient vector, and the weights
/// file all follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub embed: DenseParams,
    pub se: SeParams,
    pub norm: LayerNormParams,
    pub bilstm: BiLstmParams,
    pub head: DenseParams,
}

/// Initialize all parameters from the given seeded generator. Draw order is
/// fixed (embed, squeeze, expand, BiLSTM forward dir, BiLSTM backward dir,
/// head), so the same (spec, seed) always yields bit-identical parameters.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
    spec.validate()?;
    Ok(Model {
        spec: spec.clone(),
        embed: DenseParams::glorot(spec.embed_input(), spec.embed_dim, rng),
        se: SeParams::glorot(spec.embed_dim, spec.se_ratio, rng),
        norm: LayerNormParams::identity(spec.embed_dim),
        bilstm: BiLstmParams::glorot(spec.bilstm_input(), spec.hidden, rng),
        head: DenseParams::glorot(spec.head_input(), spec.n_classes, rng),
    })
}

fn zeroed_model(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    Ok(Model {
        spec: spec.clone(),
        embed: DenseParams::zeros(spec.embed_input(), spec.embed_dim),
        se: SeParams::zeros(spec.embed_dim, spec.se_ratio),
        norm: LayerNormParams::identity(spec.embed_dim),
        bilstm: BiLstmParams {
            forward_dir: LstmParams::zeros(spec.bilstm_input(), spec.hidden),
            backward_dir: LstmParams::zeros(spec.bilstm_input(), spec.hidden),
        },
        head: DenseParams::zeros(spec.head_input(), spec.n_classes),
    })
}

/// Gradients with the same registry layout as [`Model`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub embed: DenseGrads,
    pub se: SeGrads,
    pub norm: LayerNormGrads,
    pub bilstm: BiLstmGrads,
    pub head: DenseGrads,
}

impl ModelGrads {
    /// Flatten in registry order; aligned with [`Model::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.embed.weight.data());
        out.extend(&self.embed.bias);
        out.extend(self.se.reduce.weight.data());
        out.extend(&self.se.reduce.bias);
        out.extend(self.se.expand.weight.data());
        out.extend(&self.se.expand.bias);
        out.extend(&self.norm.gain);
        out.extend(&self.norm.bias);
        for dir in [&self.bilstm.forward_dir, &self.bilstm.backward_dir] {
            out.extend(dir.input_weights.data());
            out.extend(dir.recurrent_weights.data());
            out.extend(&dir.bias);
        }
        out.extend(self.head.weight.data());
        out.extend(&self.head.bias);
        out
    }
}

/// One named tensor of the registry.
pub struct TensorEntry<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

fn mat_entry<'a>(name: &'static str, m: &'a Matrix2) -> TensorEntry<'a> {
    TensorEntry {
        name,
        shape: vec![m.rows(), m.cols()],
        values: m.data(),
    }
}

fn vec_entry<'a>(name: &'static str, v: &'a [f64]) -> TensorEntry<'a> {
    TensorEntry {
        name,
        shape: vec![v.len()],
        values: v,
    }
}

impl Model {
    /// The parameter registry in its stable serialization order.
    pub fn tensors(&self) -> Vec<TensorEntry<'_>> {
        vec![
            mat_entry("embed.weight", &self.embed.weight),
            vec_entry("embed.bias", &self.embed.bias),
            mat_entry("se.reduce.weight", &self.se.reduce.weight),
            vec_entry("se.reduce.bias", &self.se.reduce.bias),
            mat_entry("se.expand.weight", &self.se.expand.weight),
            vec_entry("se.expand.bias", &self.se.expand.bias),
            vec_entry("norm.gain", &self.norm.gain),
            vec_entry("norm.bias", &self.norm.bias),
            mat_entry(
                "bilstm.fwd.input_weights",
                &self.bilstm.forward_dir.input_weights,
            ),
            mat_entry(
                "bilstm.fwd.recurrent_weights",
                &self.bilstm.forward_dir.recurrent_weights,
            ),
            vec_entry("bilstm.fwd.bias", &self.bilstm.forward_dir.bias),
            mat_entry(
                "bilstm.bwd.input_weights",
                &self.bilstm.backward_dir.input_weights,
            ),
            mat_entry(
                "bilstm.bwd.recurrent_weights",
                &self.bilstm.backward_dir.recurrent_weights,
            ),
            vec_entry("bilstm.bwd.bias", &self.bilstm.backward_dir.bias),
            mat_entry("head.weight", &self.head.weight),
            vec_entry("head.bias", &self.head.bias),
        ]
    }

    /// Mutable registry views, in the same order as [`Model::tensors`].
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("embed.weight", self.embed.weight.data_mut()),
            ("embed.bias", self.embed.bias.as_mut_slice()),
            ("se.reduce.weight", self.se.reduce.weight.data_mut()),
            ("se.reduce.bias", self.se.reduce.bias.as_mut_slice()),
            ("se.expand.weight", self.se.expand.weight.data_mut()),
            ("se.expand.bias", self.se.expand.bias.as_mut_slice()),
            ("norm.gain", self.norm.gain.as_mut_slice()),
            ("norm.bias", self.norm.bias.as_mut_slice()),
            (
                "bilstm.fwd.input_weights",
                self.bilstm.forward_dir.input_weights.data_mut(),
            ),
            (
                "bilstm.fwd.recurrent_weights",
                self.bilstm.forward_dir.recurrent_weights.data_mut(),
            ),
            (
                "bilstm.fwd.bias",
                self.bilstm.forward_dir.bias.as_mut_slice(),
            ),
            (
                "bilstm.bwd.input_weights",
                self.bilstm.backward_dir.input_weights.data_mut(),
            ),
            (
                "bilstm.bwd.recurrent_weights",
                self.bilstm.backward_dir.recurrent_weights.data_mut(),
            ),
            (
                "bilstm.bwd.bias",
                self.bilstm.backward_dir.bias.as_mut_slice(),
            ),
            ("head.weight", self.head.weight.data_mut()),
            ("head.bias", self.head.bias.as_mut_slice()),
        ]
    }

    /// Total scalar parameter count.
    pub fn count_params(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    /// All parameters as one flat vector in registry order.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count_params());
        for t in self.tensors() {
            out.extend(t.values);
        }
        out
    }

    /// Overwrite all parameters from a flat vector in registry order.
    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count_params() {
            return Err(Error::shape(
                "assign_params",
                format!(
                    "{} values vs {} parameters",
                    flat.len(),
                    self.count_params()
                ),
            ));
        }
        let mut at = 0;
        for (_, slot) in self.tensors_mut() {
            slot.copy_from_slice(&flat[at..at + slot.len()]);
            at += slot.len();
        }
        Ok(())
    }
}

/// Intermediates saved by [`forward`] for [`backward`].
pub struct ForwardCache {
    wiring: WiringCache,
    fused: Matrix2,
}

enum WiringCache {
    Parallel {
        vit: VitBlockCache,
        bilstm: BiLstmCache,
    },
    VitThenBilstm {
        vit: VitBlockCache,
        bilstm: BiLstmCache,
    },
    BilstmThenVit {
        bilstm: BiLstmCache,
        vit: VitBlockCache,
    },
}

fn check_input(m: &Model, x: &Matrix3) -> Result<()> {
    if x.steps() != m.spec.steps || x.channels() != m.spec.input_channels {
        return Err(Error::shape(
            "model::forward",
            format!(
                "input ({}x{}x{}) vs spec steps={} channels={}",
                x.batch(),
                x.steps(),
                x.channels(),
                m.spec.steps,
                m.spec.input_channels
            ),
        ));
    }
    Ok(())
}

/// Run the variant wiring and the softmax head. Returns per-class
/// probabilities (rows sum to 1) and the cache for [`backward`].
pub fn forward(m: &Model, x: &Matrix3) -> Result<(Matrix2, ForwardCache)> {
    check_input(m, x)?;
    let (fused, wiring) = match m.spec.variant {
        Variant::ParallelH32 | Variant::ParallelH64 => {
            let (vit_flat, vit) = vit_se_block_forward(&m.embed, &m.se, &m.norm, x)?;
            let (seq, bilstm) = bilstm_forward(&m.bilstm, x)?;
            let bilstm_flat = seq.flatten_instances();
            (
                concat_features(&vit_flat, &bilstm_flat)?,
                WiringCache::Parallel { vit, bilstm },
            )
        }
        Variant::SeqVitThenBilstm => {
            let (vit_flat, vit) = vit_se_block_forward(&m.embed, &m.se, &m.norm, x)?;
            let tokens = Matrix3::from_flat(vit_flat, m.spec.steps, m.spec.embed_dim)?;
            let (seq, bilstm) = bilstm_forward(&m.bilstm, &tokens)?;
            (
                seq.flatten_instances(),
                WiringCache::VitThenBilstm { vit, bilstm },
            )
        }
        Variant::SeqBilstmThenVit => {
            let (seq, bilstm) = bilstm_forward(&m.bilstm, x)?;
            let (vit_flat, vit) = vit_se_block_forward(&m.embed, &m.se, &m.norm, &seq)?;
            (vit_flat, WiringCache::BilstmThenVit { bilstm, vit })
        }
    };
    let logits = dense_forward(&m.head, &fused, Activation::Identity)?;
    let probs = softmax_rows(&logits);
    Ok((probs, ForwardCache { wiring, fused }))
}

/// Backpropagate from `dLoss/dLogits` (the fused softmax/cross-entropy
/// gradient) to every parameter.
pub fn backward(m: &Model, cache: &ForwardCache, dlogits: &Matrix2) -> Result<ModelGrads> {
    let (head_grads, dfused) =
        dense_backward(&m.head, &cache.fused, Activation::Identity, dlogits)?;
    let spec = &m.spec;

    let (embed_grads, se_grads, norm_grads, bilstm_grads) = match &cache.wiring {
        WiringCache::Parallel { vit, bilstm } => {
            let (d_vit_flat, d_bilstm_flat) = split_features(&dfused, spec.steps * spec.embed_dim)?;
            let (eg, sg, ng, _) =
                vit_se_block_backward(&m.embed, &m.se, &m.norm, vit, &d_vit_flat)?;
            let d_seq = Matrix3::from_flat(d_bilstm_flat, spec.steps, 2 * spec.hidden)?;
            let (bg, _) = bilstm_backward(&m.bilstm, bilstm, &d_seq)?;
            (eg, sg, ng, bg)
        }
        WiringCache::VitThenBilstm { vit, bilstm } => {
            let d_seq = Matrix3::from_flat(dfused, spec.steps, 2 * spec.hidden)?;
            let (bg, d_tokens) = bilstm_backward(&m.bilstm, bilstm, &d_seq)?;
            let d_vit_flat = d_tokens.flatten_instances();
            let (eg, sg, ng, _) =
                vit_se_block_backward(&m.embed, &m.se, &m.norm, vit, &d_vit_flat)?;
            (eg, sg, ng, bg)
        }
        WiringCache::BilstmThenVit { bilstm, vit } => {
            let (eg, sg, ng, d_seq) =
                vit_se_block_backward(&m.embed, &m.se, &m.norm, vit, &dfused)?;
            let (bg, _) = bilstm_backward(&m.bilstm, bilstm, &d_seq)?;
            (eg, sg, ng, bg)
        }
    };

    Ok(ModelGrads {
        embed: embed_grads,
        se: se_grads,
        norm: norm_grads,
        bilstm: bilstm_grads,
        head: head_grads,
    })
}

/// Index of the row maximum, ties broken toward the lowest index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted class index per instance.
pub fn predict(m: &Model, x: &Matrix3) -> Result<Vec<usize>> {
    let (probs, _) = forward(m, x)?;
    Ok((0..probs.rows())
        .map(|r| argmax_row(probs.row(r)))
        .collect())
}

// ---------------------------------------------------------------------------
// Weights file
//
// Self-describing little-endian binary, bit-exact on round trip:
//
//   magic   8 bytes  "FWIDSW01"
//   header  7 x u32  variant index, steps, input_channels, embed_dim,
//                    se_ratio, hidden, n_classes
//   count   u32      number of tensors
//   tensor  u32 name length | name bytes (utf-8)
//           u32 ndim | ndim x u32 dims
//           prod(dims) x f64 little-endian values
// ---------------------------------------------------------------------------

const WEIGHTS_MAGIC: &[u8; 8] = b"FWIDSW01";

/// Write the model (spec fields plus every named tensor) to `path`.
pub fn save_model(m: &Model, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    for v in [
        m.spec.variant.index(),
        m.spec.steps,
        m.spec.input_channels,
        m.spec.embed_dim,
        m.spec.se_ratio,
        m.spec.hidden,
        m.spec.n_classes,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let tensors = m.tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        buf.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Read a weights file back into a model. Every registry tensor must be
/// present with its exact shape, no extras.
pub fn load_model(path: &Path) -> Result<Model> {
    let mut f = io::BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Data(format!(
            "{}: not a weights file (bad magic)",
            path.display()
        )));
    }
    let variant = Variant::from_index(read_u32(&mut f)? as usize)?;
    let spec = ModelSpec {
        variant,
        steps: read_u32(&mut f)? as usize,
        input_channels: read_u32(&mut f)? as usize,
        embed_dim: read_u32(&mut f)? as usize,
        se_ratio: read_u32(&mut f)? as usize,
        hidden: read_u32(&mut f)? as usize,
        n_classes: read_u32(&mut f)? as usize,
    };
    let count = read_u32(&mut f)? as usize;
    let mut loaded: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut f)? as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Data("weights file: non-utf8 tensor name".to_string()))?;
        let ndim = read_u32(&mut f)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut f)? as usize);
        }
        let len: usize = shape.iter().product();
        let mut values = vec![0.0f64; len];
        for v in &mut values {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        loaded.insert(name, (shape, values));
    }

    let mut model = zeroed_model(&spec)?;
    let expected: Vec<(&'static str, Vec<usize>)> = model
        .tensors()
        .iter()
        .map(|t| (t.name, t.shape.clone()))
        .collect();
    if loaded.len() != expected.len() {
        return Err(Error::Data(format!(
            "weights file: {} tensors, expected {}",
            loaded.len(),
            expected.len()
        )));
    }
    for (name, shape) in &expected {
        let (got_shape, values) = loaded
            .get(*name)
            .ok_or_else(|| Error::Data(format!("weights file: missing tensor `{name}`")))?;
        if got_shape != shape {
            return Err(Error::Data(format!(
                "weights file: tensor `{name}` has shape {got_shape:?}, expected {shape:?}"
            )));
        }
        for (n, slot) in model.tensors_mut() {
            if n == *name {
                slot.copy_from_slice(values);
            }
        }
    }
    Ok(model)
}
