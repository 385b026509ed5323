//! Adam training loop with dropout and early stopping, plus the grid sweep.

use std::cmp::Ordering;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{loss_and_grad, Dropout, ModelError, ModelKind, PredictorParams};
use crate::features::{class_weights, ClassWeights, SequenceWindow};

/// Smallest validation-loss decrease that counts as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub dropout_prob: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lambda_pp: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            learning_rate: 1e-3,
            dropout_prob: 0.1,
            max_epochs: 200,
            patience: 20,
            batch_size: 16,
            lambda_pp: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must be in [0, 1)");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if !(self.lambda_pp >= 0.0) || !self.lambda_pp.is_finite() {
            return bad("lambda_pp must be a finite non-negative number");
        }
        Ok(())
    }
}

/// Losses per epoch; index 0 holds the losses of the initial parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub wall_train_s: f64,
    pub wall_infer_s: f64,
    pub param_count: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_loss.get(self.best_epoch).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            out.push_str(&format!("{e},{t},{v}\n"));
        }
        out
    }
}

/// Stops once `patience` consecutive epochs fail to beat the best loss by
/// at least [`MIN_IMPROVEMENT`]. The first observation always improves.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, stale: 0 }
    }

    /// Records a loss; returns `(improved, stop)`.
    pub fn observe(&mut self, loss: f64) -> (bool, bool) {
        if self.best - loss >= MIN_IMPROVEMENT {
            self.best = loss;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..w.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            w[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

fn usable(windows: &[SequenceWindow]) -> Vec<&SequenceWindow> {
    windows.iter().filter(|w| !w.censored).collect()
}

fn mean_loss(windows: &[&SequenceWindow], params: &PredictorParams, weights: &ClassWeights, lambda: f64) -> f64 {
    let layout = params.layout();
    let mut total = 0.0;
    for w in windows {
        let (pred, _) = super::forward_cached(params, &layout, &w.features, &mut Dropout::Off);
        total += super::sample_loss(&pred, w.target_tos_s, w.target_pp, weights, lambda).0;
    }
    total / windows.len() as f64
}

fn check_windows(params: &PredictorParams, windows: &[&SequenceWindow]) -> Result<(), ModelError> {
    for w in windows {
        super::check_input(params, &w.features)?;
    }
    Ok(())
}

/// Trains on the uncensored windows of `train`, early-stopping on `val`.
/// Returns the parameters of the best validation epoch.
pub fn train(
    kind: ModelKind,
    train: &[SequenceWindow],
    val: &[SequenceWindow],
    cfg: &TrainConfig,
) -> Result<(PredictorParams, TrainHistory), ModelError> {
    let val_set = usable(val);
    if val_set.is_empty() {
        return Err(ModelError::EmptySplit("validation"));
    }
    let weights = training_weights(train)?;
    let lambda = cfg.lambda_pp;
    train_with_validator(kind, train, cfg, |p| {
        check_windows(p, &val_set)?;
        Ok(mean_loss(&val_set, p, &weights, lambda))
    })
}

fn training_weights(train: &[SequenceWindow]) -> Result<ClassWeights, ModelError> {
    let set = usable(train);
    if set.is_empty() {
        return Err(ModelError::EmptySplit("training"));
    }
    let labels: Vec<bool> = set.iter().map(|w| w.target_pp).collect();
    class_weights(&labels).map_err(|_| ModelError::SingleClass)
}

/// Training loop with a caller-supplied validation loss.
pub fn train_with_validator<V>(
    kind: ModelKind,
    train: &[SequenceWindow],
    cfg: &TrainConfig,
    mut validate: V,
) -> Result<(PredictorParams, TrainHistory), ModelError>
where
    V: FnMut(&PredictorParams) -> Result<f64, ModelError>,
{
    cfg.validate()?;
    let started = Instant::now();
    let weights = training_weights(train)?;
    let set = usable(train);
    let first = set[0];
    let mut params = PredictorParams::init(kind, first.feature_dim(), cfg.hidden_dim, first.seq_len(), cfg.seed)?;
    check_windows(&params, &set)?;
    let layout = params.layout();

    let mut history = TrainHistory { param_count: params.param_count(), ..Default::default() };
    history.train_loss.push(mean_loss(&set, &params, &weights, cfg.lambda_pp));
    history.val_loss.push(validate(&params)?);

    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut adam = Adam::new(params.weights.len(), cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut order: Vec<usize> = (0..set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut idx = chunk.to_vec();
            // summation order inside a batch must not depend on the shuffle
            idx.sort_unstable();
            let batch: Vec<&SequenceWindow> = idx.iter().map(|&i| set[i]).collect();
            let mut dropout = Dropout::On { p: cfg.dropout_prob, rng: &mut drop_rng };
            let (l, grad) = loss_and_grad(&batch, &params, &layout, &weights, cfg.lambda_pp, &mut dropout);
            epoch_loss += l * batch.len() as f64;
            adam.step(&mut params.weights, &grad);
        }
        let train_loss = epoch_loss / set.len() as f64;
        let val_loss = if params.is_finite() { validate(&params)? } else { f64::NAN };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            history.wall_train_s = started.elapsed().as_secs_f64();
            return Err(ModelError::NonFiniteLoss { epoch, history: Box::new(history) });
        }
        let (improved, stop) = stopper.observe(val_loss);
        if improved {
            best.weights.copy_from_slice(&params.weights);
            history.best_epoch = epoch;
        }
        if stop {
            break;
        }
    }
    history.wall_train_s = started.elapsed().as_secs_f64();
    Ok((best, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    pub seq_lens: Vec<usize>,
    pub hidden_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self { seq_lens: vec![5, 10, 20], hidden_dims: vec![16, 32, 64], learning_rates: vec![1e-3, 3e-4] }
    }
}

impl GridSpace {
    pub fn len(&self) -> usize {
        self.seq_lens.len() * self.hidden_dims.len() * self.learning_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome {
    Trained { best_val_loss: f64, stopped_epoch: usize, param_count: usize },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kind: ModelKind,
    pub seq_len: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub outcome: GridOutcome,
}

impl GridRow {
    fn config_cmp(&self, other: &Self) -> Ordering {
        (self.kind, self.seq_len, self.hidden_dim)
            .cmp(&(other.kind, other.seq_len, other.hidden_dim))
            .then(self.learning_rate.total_cmp(&other.learning_rate))
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the winning cell.
    pub best: Option<usize>,
    pub best_params: Option<PredictorParams>,
}

impl GridResult {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|i| &self.rows[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,seq_len,hidden_dim,learning_rate,status,best_val_loss,stopped_epoch,params\n");
        for r in &self.rows {
            let tail = match &r.outcome {
                GridOutcome::Trained { best_val_loss, stopped_epoch, param_count } => {
                    format!("ok,{best_val_loss},{stopped_epoch},{param_count}")
                }
                GridOutcome::Failed(msg) => format!("failed: {},NA,NA,NA", msg.replace(',', ";")),
            };
            out.push_str(&format!("{},{},{},{},{tail}\n", r.kind, r.seq_len, r.hidden_dim, r.learning_rate));
        }
        out
    }
}

/// Windows for one sequence length: `(train, validation)`.
pub type SplitData = (Vec<SequenceWindow>, Vec<SequenceWindow>);

/// Trains every (kind, seq_len, hidden_dim, learning_rate) cell with the same
/// seed and picks the lowest validation loss; ties go to the smaller model,
/// then to the lexicographically smaller configuration. A failing cell is
/// recorded and the sweep carries on.
pub fn grid_search<D>(
    kinds: &[ModelKind],
    space: &GridSpace,
    base: &TrainConfig,
    data: D,
    jobs: usize,
) -> Result<GridResult, ModelError>
where
    D: Fn(usize) -> Result<SplitData, String> + Sync,
{
    if kinds.is_empty() || space.is_empty() {
        return Err(ModelError::InvalidConfig("empty search space".into()));
    }
    let datasets: Vec<(usize, Result<SplitData, String>)> = space.seq_lens.iter().map(|&l| (l, data(l))).collect();
    let mut cells = Vec::new();
    for &kind in kinds {
        for (li, &seq_len) in space.seq_lens.iter().enumerate() {
            for &hidden_dim in &space.hidden_dims {
                for &learning_rate in &space.learning_rates {
                    cells.push((kind, li, seq_len, hidden_dim, learning_rate));
                }
            }
        }
    }
    let run = |&(kind, li, seq_len, hidden_dim, learning_rate): &(ModelKind, usize, usize, usize, f64)| {
        let cfg = TrainConfig { hidden_dim, learning_rate, ..base.clone() };
        let outcome = match &datasets[li].1 {
            Err(e) => Err(e.clone()),
            Ok((tr, va)) => train(kind, tr, va, &cfg).map_err(|e| e.to_string()),
        };
        let (outcome, params) = match outcome {
            Ok((p, h)) => (
                GridOutcome::Trained {
                    best_val_loss: h.best_val_loss().unwrap_or(f64::NAN),
                    stopped_epoch: h.stopped_epoch,
                    param_count: h.param_count,
                },
                Some(p),
            ),
            Err(e) => (GridOutcome::Failed(e), None),
        };
        (GridRow { kind, seq_len, hidden_dim, learning_rate, outcome }, params)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let results: Vec<(GridRow, Option<PredictorParams>)> = pool.install(|| cells.par_iter().map(run).collect());

    let mut best: Option<usize> = None;
    for (i, (row, _)) in results.iter().enumerate() {
        let GridOutcome::Trained { best_val_loss, param_count, .. } = row.outcome else { continue };
        if !best_val_loss.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &results[b].0;
                let GridOutcome::Trained { best_val_loss: bv, param_count: bp, .. } = cur.outcome else { unreachable!() };
                best_val_loss
                    .total_cmp(&bv)
                    .then(param_count.cmp(&bp))
                    .then(row.config_cmp(cur))
                    .is_lt()
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best_params = best.and_then(|i| results[i].1.clone());
    let rows = results.into_iter().map(|(r, _)| r).collect();
    Ok(GridResult { rows, best, best_params })
}
