//! Sequence predictors with a shared two-output head.
//!
//! Each predictor reads a window of feature rows and produces
//! `(log1p(ToS) estimate, ping-pong logit)`. Parameters live in one flat
//! vector whose tensor order is fixed by [`PredictorParams::layout`]; the
//! optimiser, gradient checker and binary format all work on that vector.

pub mod gradcheck;
mod gru;
pub mod linalg;
mod lstm;
pub mod train;
mod transformer;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{ClassWeights, SequenceWindow};
use linalg::{matvec_add, matvec_t_add, outer_add, sigmoid, softplus};

pub use gradcheck::{grad_check, GradCheckDims};
pub use train::{
    grid_search, train, train_with_validator, EarlyStopping, GridOutcome, GridResult, GridRow, GridSpace,
    SplitData, TrainConfig, TrainHistory,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, history: Box<TrainHistory> },
    #[error("empty {0} set")]
    EmptySplit(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("bad parameter file: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Gru,
    Lstm,
    Transformer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gru, ModelKind::Lstm, ModelKind::Transformer];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gru => "gru",
            ModelKind::Lstm => "lstm",
            ModelKind::Transformer => "transformer",
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelKind::Gru => 0,
            ModelKind::Lstm => 1,
            ModelKind::Transformer => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gru" => Ok(ModelKind::Gru),
            "lstm" => Ok(ModelKind::Lstm),
            "transformer" => Ok(ModelKind::Transformer),
            other => Err(format!("unknown model kind `{other}` (expected gru, lstm or transformer)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorShape {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
}

pub(crate) const fn shape(name: &'static str, rows: usize, cols: usize) -> TensorShape {
    TensorShape { name, rows, cols }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub shapes: Vec<TensorShape>,
    offsets: Vec<usize>,
    pub total: usize,
}

impl Layout {
    fn new(shapes: Vec<TensorShape>) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for s in &shapes {
            offsets.push(total);
            total += s.rows * s.cols;
        }
        Self { shapes, offsets, total }
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        let s = &self.shapes[i];
        self.offsets[i]..self.offsets[i] + s.rows * s.cols
    }
}

/// Weights of one predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub seq_len: usize,
    pub weights: Vec<f64>,
}

impl PredictorParams {
    pub fn layout_for(kind: ModelKind, input_dim: usize, hidden_dim: usize, seq_len: usize) -> Layout {
        let mut shapes = match kind {
            ModelKind::Gru => gru::shapes(input_dim, hidden_dim),
            ModelKind::Lstm => lstm::shapes(input_dim, hidden_dim),
            ModelKind::Transformer => transformer::shapes(input_dim, hidden_dim, seq_len),
        };
        shapes.push(shape("head_w", 2, hidden_dim));
        shapes.push(shape("head_b", 2, 1));
        Layout::new(shapes)
    }

    pub fn layout(&self) -> Layout {
        Self::layout_for(self.kind, self.input_dim, self.hidden_dim, self.seq_len)
    }

    fn check_dims(kind: ModelKind, input_dim: usize, hidden_dim: usize, seq_len: usize) -> Result<(), ModelError> {
        if input_dim == 0 || hidden_dim == 0 || seq_len == 0 {
            return Err(ModelError::DimensionMismatch("dimensions must be positive".into()));
        }
        if kind == ModelKind::Transformer && !hidden_dim.is_multiple_of(transformer::HEADS) {
            return Err(ModelError::DimensionMismatch(format!(
                "transformer hidden_dim {hidden_dim} must be divisible by {} heads",
                transformer::HEADS
            )));
        }
        Ok(())
    }

    /// Uniform(-a, a) initialisation with `a = 1 / sqrt(hidden_dim)`.
    pub fn init(kind: ModelKind, input_dim: usize, hidden_dim: usize, seq_len: usize, seed: u64) -> Result<Self, ModelError> {
        Self::check_dims(kind, input_dim, hidden_dim, seq_len)?;
        let layout = Self::layout_for(kind, input_dim, hidden_dim, seq_len);
        let a = 1.0 / (hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..layout.total).map(|_| rng.random_range(-a..a)).collect();
        Ok(Self { kind, input_dim, hidden_dim, seq_len, weights })
    }

    pub fn zeros(kind: ModelKind, input_dim: usize, hidden_dim: usize, seq_len: usize) -> Result<Self, ModelError> {
        Self::check_dims(kind, input_dim, hidden_dim, seq_len)?;
        let total = Self::layout_for(kind, input_dim, hidden_dim, seq_len).total;
        Ok(Self { kind, input_dim, hidden_dim, seq_len, weights: vec![0.0; total] })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    /// Mutable view of one named tensor.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let layout = self.layout();
        let i = layout.shapes.iter().position(|s| s.name == name)?;
        Some(&mut self.weights[layout.range(i)])
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let layout = self.layout();
        let i = layout.shapes.iter().position(|s| s.name == name)?;
        Some(&self.weights[layout.range(i)])
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Binary format: `HOSQ1`, kind byte, input/hidden/seq_len as u32 LE, then
    /// every tensor in layout order as row-major f64 LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 1 + 12 + 8 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.push(self.kind.tag());
        for d in [self.input_dim, self.hidden_dim, self.seq_len] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let err = |m: &str| ModelError::Decode(m.to_string());
        if bytes.len() < 18 || &bytes[..5] != MAGIC {
            return Err(err("missing HOSQ1 magic"));
        }
        let kind = ModelKind::from_tag(bytes[5]).ok_or_else(|| err("unknown kind byte"))?;
        let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
        let (input_dim, hidden_dim, seq_len) = (dim(0), dim(1), dim(2));
        Self::check_dims(kind, input_dim, hidden_dim, seq_len)?;
        let total = Self::layout_for(kind, input_dim, hidden_dim, seq_len).total;
        let body = &bytes[18..];
        if body.len() != total * 8 {
            return Err(err(&format!("expected {} weight bytes, found {}", total * 8, body.len())));
        }
        let weights = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { kind, input_dim, hidden_dim, seq_len, weights })
    }
}

const MAGIC: &[u8; 5] = b"HOSQ1";

/// Inverted dropout; `Off` at inference.
pub enum Dropout<'a> {
    Off,
    On { p: f64, rng: &'a mut ChaCha8Rng },
}

impl Dropout<'_> {
    /// Mask of `n` multipliers, `None` when dropout is inactive.
    fn mask(&mut self, n: usize) -> Option<Vec<f64>> {
        match self {
            Dropout::On { p, rng } if *p > 0.0 => {
                let keep = 1.0 / (1.0 - *p);
                Some((0..n).map(|_| if rng.random::<f64>() < *p { 0.0 } else { keep }).collect())
            }
            _ => None,
        }
    }
}

fn apply_mask(v: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => v.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Estimate of `log1p(ToS)`.
    pub tos_log: f64,
    pub pp_logit: f64,
}

impl Prediction {
    /// Predicted Time-of-Stay in seconds.
    pub fn tos_s(&self) -> f64 {
        self.tos_log.exp_m1().max(0.0)
    }

    pub fn pp_prob(&self) -> f64 {
        sigmoid(self.pp_logit)
    }
}

enum KindCache {
    Gru(gru::Cache),
    Lstm(lstm::Cache),
    Transformer(transformer::Cache),
}

struct Cache {
    kind: KindCache,
    rep: Vec<f64>,
    head_mask: Option<Vec<f64>>,
}

fn check_input(params: &PredictorParams, rows: &[Vec<f64>]) -> Result<(), ModelError> {
    if rows.len() != params.seq_len {
        return Err(ModelError::DimensionMismatch(format!(
            "window has {} rows, model expects {}",
            rows.len(),
            params.seq_len
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != params.input_dim) {
        return Err(ModelError::DimensionMismatch(format!(
            "row has {} features, model expects {}",
            r.len(),
            params.input_dim
        )));
    }
    Ok(())
}

fn forward_cached(params: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], dropout: &mut Dropout) -> (Prediction, Cache) {
    let (rep, kind) = match params.kind {
        ModelKind::Gru => {
            let (rep, c) = gru::forward(params, layout, rows);
            (rep, KindCache::Gru(c))
        }
        ModelKind::Lstm => {
            let (rep, c) = lstm::forward(params, layout, rows);
            (rep, KindCache::Lstm(c))
        }
        ModelKind::Transformer => {
            let (rep, c) = transformer::forward(params, layout, rows, dropout);
            (rep, KindCache::Transformer(c))
        }
    };
    let head_mask = dropout.mask(rep.len());
    let s = apply_mask(&rep, &head_mask);
    let n = layout.shapes.len();
    let mut out = params.weights[layout.range(n - 1)].to_vec();
    matvec_add(&mut out, &params.weights[layout.range(n - 2)], 2, params.hidden_dim, &s);
    (Prediction { tos_log: out[0], pp_logit: out[1] }, Cache { kind, rep, head_mask })
}

fn backward(params: &PredictorParams, layout: &Layout, rows: &[Vec<f64>], cache: &Cache, d_out: [f64; 2], grad: &mut [f64]) {
    let n = layout.shapes.len();
    let h = params.hidden_dim;
    let s = apply_mask(&cache.rep, &cache.head_mask);
    outer_add(&mut grad[layout.range(n - 2)], 2, h, &d_out, &s);
    linalg::add_into(&mut grad[layout.range(n - 1)], &d_out);
    let mut d_s = vec![0.0; h];
    matvec_t_add(&mut d_s, &params.weights[layout.range(n - 2)], 2, h, &d_out);
    let d_rep = apply_mask(&d_s, &cache.head_mask);
    match &cache.kind {
        KindCache::Gru(c) => gru::backward(params, layout, rows, c, &d_rep, grad),
        KindCache::Lstm(c) => lstm::backward(params, layout, rows, c, &d_rep, grad),
        KindCache::Transformer(c) => transformer::backward(params, layout, rows, c, &d_rep, grad),
    }
}

/// Inference (or a training-mode pass when `dropout` is on).
pub fn forward(params: &PredictorParams, rows: &[Vec<f64>], mut dropout: Dropout) -> Result<Prediction, ModelError> {
    check_input(params, rows)?;
    let layout = params.layout();
    Ok(forward_cached(params, &layout, rows, &mut dropout).0)
}

/// Attention weights of a transformer, indexed `[head][query][key]`.
pub fn attention_weights(params: &PredictorParams, rows: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>, ModelError> {
    check_input(params, rows)?;
    if params.kind != ModelKind::Transformer {
        return Err(ModelError::DimensionMismatch("attention weights exist only for transformers".into()));
    }
    let layout = params.layout();
    let (_, cache) = transformer::forward(params, &layout, rows, &mut Dropout::Off);
    Ok(cache.attention())
}

/// Loss of one sample and its gradient with respect to the two outputs.
pub fn sample_loss(pred: &Prediction, tos_true_s: f64, pp_true: bool, weights: &ClassWeights, lambda_pp: f64) -> (f64, [f64; 2]) {
    let target = tos_true_s.ln_1p();
    let diff = pred.tos_log - target;
    let y = if pp_true { 1.0 } else { 0.0 };
    let w = weights.get(pp_true);
    let bce = softplus(pred.pp_logit) - y * pred.pp_logit;
    let loss = diff * diff + lambda_pp * w * bce;
    let d = [2.0 * diff, lambda_pp * w * (sigmoid(pred.pp_logit) - y)];
    (loss, d)
}

/// Mean loss over a batch: squared error on `log1p(ToS)` plus the class
/// weighted binary cross-entropy of the ping-pong output.
pub fn loss(batch: &[SequenceWindow], params: &PredictorParams, weights: &ClassWeights, lambda_pp: f64) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptySplit("batch"));
    }
    let layout = params.layout();
    let mut total = 0.0;
    for w in batch {
        check_input(params, &w.features)?;
        let (pred, _) = forward_cached(params, &layout, &w.features, &mut Dropout::Off);
        total += sample_loss(&pred, w.target_tos_s, w.target_pp, weights, lambda_pp).0;
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and its gradient over a batch.
pub(crate) fn loss_and_grad(
    batch: &[&SequenceWindow],
    params: &PredictorParams,
    layout: &Layout,
    weights: &ClassWeights,
    lambda_pp: f64,
    dropout: &mut Dropout,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.weights.len()];
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for w in batch {
        let (pred, cache) = forward_cached(params, layout, &w.features, dropout);
        let (l, d) = sample_loss(&pred, w.target_tos_s, w.target_pp, weights, lambda_pp);
        total += l;
        backward(params, layout, &w.features, &cache, [d[0] * scale, d[1] * scale], &mut grad);
    }
    (total * scale, grad)
}
