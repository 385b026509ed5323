//! Central-difference check of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_and_grad, Dropout, ModelError, ModelKind, PredictorParams};
use crate::features::{ClassWeights, SequenceWindow, TriggerContext};

pub const FD_STEP: f64 = 1e-5;
const BATCH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub seq_len: usize,
}

impl Default for GradCheckDims {
    fn default() -> Self {
        Self { input_dim: 4, hidden_dim: 8, seq_len: 6 }
    }
}

fn random_window(dims: GradCheckDims, pp: bool, rng: &mut ChaCha8Rng) -> SequenceWindow {
    let features = (0..dims.seq_len)
        .map(|_| (0..dims.input_dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    SequenceWindow {
        features,
        target_tos_s: rng.random_range(0.5..20.0),
        censored: false,
        target_pp: pp,
        event_index: 0,
        context: TriggerContext {
            trigger_ts_ms: 0,
            source_cell_id: 0,
            target_cell_id: 1,
            serving_rsrp_dbm: -90.0,
            rsrp_slope: 0.0,
            snr_slope: 0.0,
            bearings_deg: vec![0.0; dims.seq_len],
            row_ts_ms: (0..dims.seq_len as i64).collect(),
        },
    }
}

/// Largest `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)` over every parameter,
/// for a random model and a small random batch with both labels present.
pub fn grad_check(kind: ModelKind, dims: GradCheckDims, seed: u64) -> Result<f64, ModelError> {
    let mut params = PredictorParams::init(kind, dims.input_dim, dims.hidden_dim, dims.seq_len, seed)?;
    let layout = params.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let windows: Vec<SequenceWindow> = (0..BATCH).map(|i| random_window(dims, i % 2 == 0, &mut rng)).collect();
    let batch: Vec<&SequenceWindow> = windows.iter().collect();
    let weights = ClassWeights { negative: 0.7, positive: 2.1 };
    let lambda = 1.0;

    let (_, analytic) = loss_and_grad(&batch, &params, &layout, &weights, lambda, &mut Dropout::Off);
    let mut worst: f64 = 0.0;
    for (i, &ga) in analytic.iter().enumerate() {
        let orig = params.weights[i];
        params.weights[i] = orig + FD_STEP;
        let up = loss_and_grad(&batch, &params, &layout, &weights, lambda, &mut Dropout::Off).0;
        params.weights[i] = orig - FD_STEP;
        let down = loss_and_grad(&batch, &params, &layout, &weights, lambda, &mut Dropout::Off).0;
        params.weights[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
