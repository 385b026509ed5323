//! End-to-end experiment: label, window, train, score and replay.
//!
//! Windows are split chronologically. The model is fitted on the first part,
//! early-stopped on the second, and both detection scores and the replay are
//! computed on the held-out tail of the trace only.

use std::time::Instant;

use rayon::prelude::*;

use crate::a3::{baseline_log, HandoverLog};
use crate::config::RunConfig;
use crate::control::{replay_with_avoidance, DetectInput, DetectOptions, ReplayConfig, ReplayOutcome};
use crate::features::{apply_minmax, build_windows, chronological_split, class_weights, fit_minmax, FeatureMode, FeatureSpec, SequenceWindow};
use crate::metrics::{classification_metrics, reduction_metrics, timing_capture, Classification, MetricsSummary, Reductions};
use crate::models::{forward, train, Dropout, ModelKind, PredictorParams, TrainConfig, TrainHistory};
use crate::trace::{interpolate_missing, repair_ranges, validate_ranges, DriveTrace, RepairPolicy, ValidationReport};
use crate::Error;

/// Range repair followed by interpolation of missing values.
pub fn prepare_trace(raw: &DriveTrace, policy: RepairPolicy) -> Result<(DriveTrace, ValidationReport), Error> {
    let report = validate_ranges(raw);
    let repaired = repair_ranges(raw, policy)?;
    Ok((interpolate_missing(&repaired)?, report))
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub kind: ModelKind,
    pub mode: FeatureMode,
    pub params: PredictorParams,
    pub spec: FeatureSpec,
    pub history: TrainHistory,
    pub split_sizes: [usize; 3],
    /// Detection scored on the test windows of the full baseline.
    pub detection: Option<Classification>,
    /// Sample index where the held-out segment starts.
    pub holdout_start: usize,
    pub holdout_baseline: HandoverLog,
    pub replay: ReplayOutcome,
    pub reductions: Reductions,
    pub summary: MetricsSummary,
}

/// Trace records from `start` to the end.
pub fn tail(trace: &DriveTrace, start: usize) -> Result<DriveTrace, Error> {
    Ok(DriveTrace::new(trace.records[start..].to_vec(), trace.sample_period_ms)?)
}

fn score_test(
    params: &PredictorParams,
    test: &[SequenceWindow],
    cfg: &RunConfig,
    opts: &DetectOptions,
) -> Result<Option<Classification>, Error> {
    if test.is_empty() {
        return Ok(None);
    }
    let mut inputs = Vec::with_capacity(test.len());
    for w in test {
        let pred = forward(params, &w.features, Dropout::Off)?;
        inputs.push(DetectInput {
            y_p: Some(pred.tos_s()),
            rsrp_slope: w.context.rsrp_slope,
            snr_slope: w.context.snr_slope,
            pp_prob: Some(pred.pp_prob()),
            truth_pp: w.target_pp,
        });
    }
    let det = crate::control::detect(&inputs, &cfg.thresholds, opts)?;
    let truth: Vec<bool> = test.iter().map(|w| w.target_pp).collect();
    Ok(Some(classification_metrics(&truth, &det.is_pp())?))
}

/// Runs one (kind, mode) cell on a repaired trace.
pub fn run_experiment(trace: &DriveTrace, cfg: &RunConfig, seed: u64, kind: ModelKind, mode: FeatureMode) -> Result<Experiment, Error> {
    let baseline = baseline_log(trace, &cfg.a3)?;
    let set = build_windows(trace, &baseline, mode, cfg.seq_len);
    let (train_w, val_w, test_w) = chronological_split(&set.windows, cfg.split)?;
    let spec = fit_minmax(&train_w, mode)?;
    let (train_s, val_s, test_s) = (apply_minmax(&spec, &train_w)?, apply_minmax(&spec, &val_w)?, apply_minmax(&spec, &test_w)?);

    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let (params, mut history) = train(kind, &train_s, &val_s, &tcfg)?;
    let labels: Vec<bool> = train_s.iter().filter(|w| !w.censored).map(|w| w.target_pp).collect();
    let weights = class_weights(&labels)?;

    let mut replay_cfg = ReplayConfig::for_mode(&params, &spec);
    replay_cfg.a3 = cfg.a3;
    replay_cfg.thresholds = cfg.thresholds;
    replay_cfg.detect.weights = weights;
    replay_cfg.detect.use_pp_head = cfg.use_pp_head;
    replay_cfg.detect.oracle_weights = cfg.oracle_weights;

    let started = Instant::now();
    let detection = score_test(&params, &test_s, cfg, &replay_cfg.detect)?;
    let score_s = started.elapsed().as_secs_f64();

    // the held-out segment begins at the first row of the first test window
    let holdout_start = test_w
        .first()
        .and_then(|w| trace.index_of_ts(w.context.row_ts_ms[0]))
        .unwrap_or(trace.len().saturating_sub(1));
    let segment = tail(trace, holdout_start)?;
    let holdout_baseline = baseline_log(&segment, &cfg.a3)?;
    let replay = replay_with_avoidance(&segment, &holdout_baseline, &replay_cfg)?;
    let reductions = reduction_metrics(&holdout_baseline, &replay.log)?;

    history.wall_infer_s = score_s;
    let timing = timing_capture(&history, score_s, test_s.len());
    let summary = MetricsSummary { kind: kind.to_string(), mode: mode.to_string(), detection, reductions, timing };
    Ok(Experiment {
        kind,
        mode,
        params,
        spec,
        history,
        split_sizes: [train_w.len(), val_w.len(), test_w.len()],
        detection,
        holdout_start,
        holdout_baseline,
        replay,
        reductions,
        summary,
    })
}

/// Every configured (kind, mode) pair, at most `jobs` at a time. Results come
/// back in (kind, mode) configuration order.
pub fn run_all(trace: &DriveTrace, cfg: &RunConfig, seed: u64, jobs: usize) -> Result<Vec<Experiment>, Error> {
    let cells: Vec<(ModelKind, FeatureMode)> =
        cfg.kinds.iter().flat_map(|&k| cfg.modes.iter().map(move |&m| (k, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Io { path: "<thread pool>".into(), reason: e.to_string() })?;
    pool.install(|| cells.par_iter().map(|&(k, m)| run_experiment(trace, cfg, seed, k, m)).collect())
}
