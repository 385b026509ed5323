//! Ping-pong detection, handover avoidance and counterfactual replay.

use std::cell::RefCell;
use std::time::Instant;

use thiserror::Error;

use crate::a3::{compute_tos, label_ping_pong, run_a3_with, A3Error, A3Params, HandoverLog, Trigger, TriggerDecision};
use crate::features::{ClassWeights, FeatureError, FeatureMode, FeatureSpec, TraceFeatures};
use crate::models::{forward, Dropout, ModelError, PredictorParams};
use crate::trace::DriveTrace;

pub const DEFAULT_TOS_TH_S: f64 = 5.0;
pub const DEFAULT_RSRP_SLOPE_TH: f64 = 5.0;
pub const DEFAULT_SNR_SLOPE_TH: f64 = 3.0;
pub const DEFAULT_OSC_TH_S: f64 = 2.0;
pub const DEFAULT_THETA_RSRP_DBM: f64 = -110.0;
pub const DEFAULT_THETA_TOS_S: f64 = 5.0;
pub const MAWAY_DEG: f64 = 45.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("event {0} has no ToS prediction")]
    MissingPrediction(usize),
    #[error("need at least 2 bearing samples, got {0}")]
    TooFewBearings(usize),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("model and feature spec disagree: {0}")]
    SpecMismatch(String),
    #[error(transparent)]
    A3(#[from] A3Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlThresholds {
    pub tos_th_s: f64,
    pub rsrp_slope_th_db_s: f64,
    pub snr_slope_th_db_s: f64,
    pub osc_th_s: f64,
    pub theta_rsrp_dbm: f64,
    pub theta_tos_s: f64,
    pub maway_deg: f64,
}

impl Default for ControlThresholds {
    fn default() -> Self {
        Self {
            tos_th_s: DEFAULT_TOS_TH_S,
            rsrp_slope_th_db_s: DEFAULT_RSRP_SLOPE_TH,
            snr_slope_th_db_s: DEFAULT_SNR_SLOPE_TH,
            osc_th_s: DEFAULT_OSC_TH_S,
            theta_rsrp_dbm: DEFAULT_THETA_RSRP_DBM,
            theta_tos_s: DEFAULT_THETA_TOS_S,
            maway_deg: MAWAY_DEG,
        }
    }
}

impl ControlThresholds {
    pub fn validate(&self) -> Result<(), ControlError> {
        let all = [
            self.tos_th_s,
            self.rsrp_slope_th_db_s,
            self.snr_slope_th_db_s,
            self.osc_th_s,
            self.theta_rsrp_dbm,
            self.theta_tos_s,
            self.maway_deg,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidThresholds("thresholds must be finite".into()));
        }
        if self.tos_th_s <= 0.0 || self.theta_tos_s <= 0.0 || self.osc_th_s <= 0.0 {
            return Err(ControlError::InvalidThresholds("tos_th_s, theta_tos_s and osc_th_s must be positive".into()));
        }
        Ok(())
    }
}

/// How class weights enter the detection decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub weights: ClassWeights,
    /// Require the classifier head to agree with the rule:
    /// `pp_prob * 2 w1 / (w0 + w1) >= 0.5`.
    pub use_pp_head: bool,
    /// Keep a positive detection only when `w[p] >= 1` for the true label
    /// `p`. This reads the ground truth at decision time and is only meant for
    /// reproducing offline counts.
    pub oracle_weights: bool,
    /// Whether the SNR slope may flag oscillation.
    pub use_snr: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { weights: ClassWeights::UNIT, use_pp_head: false, oracle_weights: false, use_snr: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectInput {
    /// Predicted ToS in seconds.
    pub y_p: Option<f64>,
    pub rsrp_slope: f64,
    pub snr_slope: f64,
    pub pp_prob: Option<f64>,
    pub truth_pp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Detection {
    pub short: bool,
    pub osc: bool,
    pub is_pp: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionResult {
    pub detections: Vec<Detection>,
    /// All positive detections.
    pub n_pp: usize,
    /// Positive detections whose ground truth is a ping-pong.
    pub n_cor: usize,
}

impl DetectionResult {
    pub fn is_pp(&self) -> Vec<bool> {
        self.detections.iter().map(|d| d.is_pp).collect()
    }
}

/// Detection rule for one event.
pub fn detect_one(input: &DetectInput, y_p: f64, th: &ControlThresholds, opts: &DetectOptions) -> Detection {
    let short = y_p < th.tos_th_s;
    let osc = input.rsrp_slope.abs() > th.rsrp_slope_th_db_s || (opts.use_snr && input.snr_slope.abs() > th.snr_slope_th_db_s);
    let mut is_pp = short && (osc || y_p < th.osc_th_s);
    if is_pp && opts.use_pp_head {
        let w = &opts.weights;
        let gate = input.pp_prob.unwrap_or(0.0) * 2.0 * w.positive / (w.negative + w.positive);
        is_pp = gate >= 0.5;
    }
    if is_pp && opts.oracle_weights {
        is_pp = opts.weights.get(input.truth_pp) >= 1.0;
    }
    Detection { short, osc, is_pp }
}

pub fn detect(inputs: &[DetectInput], th: &ControlThresholds, opts: &DetectOptions) -> Result<DetectionResult, ControlError> {
    th.validate()?;
    let mut out = DetectionResult::default();
    for (i, input) in inputs.iter().enumerate() {
        let y_p = input.y_p.ok_or(ControlError::MissingPrediction(i))?;
        let d = detect_one(input, y_p, th, opts);
        if d.is_pp {
            out.n_pp += 1;
            if input.truth_pp {
                out.n_cor += 1;
            }
        }
        out.detections.push(d);
    }
    Ok(out)
}

/// Smallest angle between two bearings, in `[0, 180]`.
pub fn circular_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidInput<'a> {
    pub y_p: f64,
    pub bearings_deg: &'a [f64],
    pub serving_rsrp_dbm: f64,
    pub is_pp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Avoidance {
    pub maway: bool,
    pub safe: bool,
    pub unnec: bool,
    pub decision: TriggerDecision,
}

/// Avoidance rule for one event. With `use_bearing` off the moving-away test
/// is never true.
pub fn avoid(input: &AvoidInput, th: &ControlThresholds, use_bearing: bool) -> Result<Avoidance, ControlError> {
    let b = input.bearings_deg;
    if b.len() < 2 {
        return Err(ControlError::TooFewBearings(b.len()));
    }
    let maway = use_bearing && circular_diff_deg(b[b.len() - 1], b[b.len() - 2]) > th.maway_deg;
    let safe = input.serving_rsrp_dbm > th.theta_rsrp_dbm;
    let unnec = (input.y_p < th.theta_tos_s || maway) && safe;
    let decision = if input.is_pp || unnec { TriggerDecision::Suppress } else { TriggerDecision::Execute };
    Ok(Avoidance { maway, safe, unnec, decision })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AvoidanceResult {
    /// Suppressed triggers.
    pub n_avd: usize,
    /// Triggers flagged as moving away.
    pub n_maway: usize,
}

/// Everything the replay needs besides the trace.
#[derive(Debug, Clone, Copy)]
pub struct ReplayConfig<'a> {
    pub a3: A3Params,
    pub thresholds: ControlThresholds,
    pub detect: DetectOptions,
    pub model: &'a PredictorParams,
    pub spec: &'a FeatureSpec,
    /// Moving-away test on or off.
    pub use_bearing: bool,
}

impl<'a> ReplayConfig<'a> {
    /// Defaults for a feature mode: RSRP-only runs see neither SNR nor bearing.
    pub fn for_mode(model: &'a PredictorParams, spec: &'a FeatureSpec) -> Self {
        let all = spec.mode == FeatureMode::All;
        Self {
            a3: A3Params::default(),
            thresholds: ControlThresholds::default(),
            detect: DetectOptions { use_snr: all, ..DetectOptions::default() },
            model,
            spec,
            use_bearing: all,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub index: usize,
    pub trigger_ts_ms: i64,
    pub source_cell_id: u32,
    pub target_cell_id: u32,
    pub y_p: Option<f64>,
    pub pp_prob: Option<f64>,
    pub serving_rsrp_dbm: f64,
    pub detection: Detection,
    pub maway: bool,
    pub safe: bool,
    pub unnec: bool,
    pub decision: TriggerDecision,
    /// Too little history for a window; the trigger executed unconditionally.
    pub no_window: bool,
    pub truth_pp: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    /// Replayed log with ToS and ping-pong labels recomputed on its own chain.
    pub log: HandoverLog,
    pub decisions: Vec<DecisionRecord>,
    pub avoidance: AvoidanceResult,
    pub detection: DetectionResult,
    pub infer_s: f64,
    pub predictions: usize,
}

/// Re-runs A3 over `trace`, consulting detection and avoidance at every TTT
/// expiry. `baseline` (labelled) supplies ground truth for triggers it shares
/// with the replay.
pub fn replay_with_avoidance(trace: &DriveTrace, baseline: &HandoverLog, cfg: &ReplayConfig) -> Result<ReplayOutcome, ControlError> {
    cfg.thresholds.validate()?;
    let spec = cfg.spec;
    if spec.mins.len() != cfg.model.input_dim || spec.seq_len != cfg.model.seq_len {
        return Err(ControlError::SpecMismatch(format!(
            "model expects {}x{}, spec gives {}x{}",
            cfg.model.seq_len,
            cfg.model.input_dim,
            spec.seq_len,
            spec.mins.len()
        )));
    }
    let tf = TraceFeatures::new(trace);
    let failure: RefCell<Option<ControlError>> = RefCell::new(None);
    let mut decisions = Vec::new();
    let mut infer_s = 0.0;
    let mut predictions = 0;

    let mut policy = |t: &Trigger, index: usize| -> Result<DecisionRecord, ControlError> {
        let truth_pp = baseline
            .events
            .iter()
            .find(|e| e.executed && e.sample == t.sample && e.source_cell_id == t.source_cell_id && e.target_cell_id == t.target_cell_id)
            .is_some_and(|e| e.pp_flag);
        let mut rec = DecisionRecord {
            index,
            trigger_ts_ms: t.ts_ms,
            source_cell_id: t.source_cell_id,
            target_cell_id: t.target_cell_id,
            y_p: None,
            pp_prob: None,
            serving_rsrp_dbm: t.serving_rsrp_dbm,
            detection: Detection::default(),
            maway: false,
            safe: t.serving_rsrp_dbm > cfg.thresholds.theta_rsrp_dbm,
            unnec: false,
            decision: TriggerDecision::Execute,
            no_window: false,
            truth_pp,
        };
        let Some((rows, ctx)) =
            tf.window_at(spec.mode, spec.seq_len, t.sample, t.source_cell_id, t.target_cell_id, t.last_handover_ts_ms)
        else {
            rec.no_window = true;
            return Ok(rec);
        };
        let scaled = spec.scale_rows(&rows)?;
        let started = Instant::now();
        let pred = forward(cfg.model, &scaled, Dropout::Off)?;
        infer_s += started.elapsed().as_secs_f64();
        predictions += 1;
        let y_p = pred.tos_s();
        let input = DetectInput {
            y_p: Some(y_p),
            rsrp_slope: ctx.rsrp_slope,
            snr_slope: ctx.snr_slope,
            pp_prob: Some(pred.pp_prob()),
            truth_pp,
        };
        let det = detect_one(&input, y_p, &cfg.thresholds, &cfg.detect);
        let av = avoid(
            &AvoidInput { y_p, bearings_deg: &ctx.bearings_deg, serving_rsrp_dbm: ctx.serving_rsrp_dbm, is_pp: det.is_pp },
            &cfg.thresholds,
            cfg.use_bearing,
        )?;
        rec.y_p = Some(y_p);
        rec.pp_prob = input.pp_prob;
        rec.detection = det;
        rec.maway = av.maway;
        rec.safe = av.safe;
        rec.unnec = av.unnec;
        rec.decision = av.decision;
        Ok(rec)
    };

    let log = run_a3_with(trace, &cfg.a3, |t| {
        if failure.borrow().is_some() {
            return TriggerDecision::Execute;
        }
        match policy(t, decisions.len()) {
            Ok(rec) => {
                let d = rec.decision;
                decisions.push(rec);
                d
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                TriggerDecision::Execute
            }
        }
    })?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let log = label_ping_pong(&compute_tos(&log), cfg.a3.t_pp_s);

    let mut detection = DetectionResult::default();
    let mut avoidance = AvoidanceResult::default();
    for r in &decisions {
        if r.detection.is_pp {
            detection.n_pp += 1;
            if r.truth_pp {
                detection.n_cor += 1;
            }
        }
        detection.detections.push(r.detection);
        avoidance.n_maway += r.maway as usize;
        avoidance.n_avd += (r.decision == TriggerDecision::Suppress) as usize;
    }
    Ok(ReplayOutcome { log, decisions, avoidance, detection, infer_s, predictions })
}

pub fn decision_log_csv(records: &[DecisionRecord]) -> String {
    let mut out = String::from("i,trigger_ts_ms,source,target,y_p,short,osc,maway,safe,is_pp,decision\n");
    for r in records {
        let y_p = r.y_p.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let decision = match (r.decision, r.no_window) {
            (TriggerDecision::Suppress, _) => "SUPPRESS",
            (TriggerDecision::Execute, true) => "EXECUTE_NO_WINDOW",
            (TriggerDecision::Execute, false) => "EXECUTE",
        };
        out.push_str(&format!(
            "{},{},{},{},{y_p},{},{},{},{},{},{decision}\n",
            r.index,
            r.trigger_ts_ms,
            r.source_cell_id,
            r.target_cell_id,
            r.detection.short as u8,
            r.detection.osc as u8,
            r.maway as u8,
            r.safe as u8,
            r.detection.is_pp as u8,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(y_p: f64, rsrp_slope: f64, snr_slope: f64) -> DetectInput {
        DetectInput { y_p: Some(y_p), rsrp_slope, snr_slope, pp_prob: None, truth_pp: false }
    }

    fn run(i: DetectInput) -> Detection {
        detect_one(&i, i.y_p.unwrap(), &ControlThresholds::default(), &DetectOptions::default())
    }

    #[test]
    fn detection_examples() {
        assert!(run(input(2.0, 6.0, 0.0)).is_pp);
        assert!(!run(input(10.0, 50.0, 50.0)).is_pp);
        let d = run(input(1.0, 0.0, 0.0));
        assert!(d.is_pp && !d.osc);
        // boundary: y_p equal to the threshold is not short
        assert!(!run(input(5.0, 9.0, 9.0)).short);
    }

    #[test]
    fn counts_include_false_positives() {
        let inputs = [
            DetectInput { truth_pp: true, ..input(1.0, 0.0, 0.0) },
            input(1.0, 0.0, 0.0),
            DetectInput { truth_pp: true, ..input(9.0, 0.0, 0.0) },
        ];
        let r = detect(&inputs, &ControlThresholds::default(), &DetectOptions::default()).unwrap();
        assert_eq!((r.n_pp, r.n_cor), (2, 1));
        let missing = [DetectInput { y_p: None, ..input(1.0, 0.0, 0.0) }];
        assert!(matches!(
            detect(&missing, &ControlThresholds::default(), &DetectOptions::default()),
            Err(ControlError::MissingPrediction(0))
        ));
    }

    #[test]
    fn head_gate_and_oracle_weights() {
        let th = ControlThresholds::default();
        let weights = ClassWeights { negative: 0.5, positive: 3.0 };
        let head = DetectOptions { weights, use_pp_head: true, ..Default::default() };
        // 0.2 * 2 * 3 / 3.5 = 0.343 -> rejected; 0.4 -> 0.686 kept
        let mut i = DetectInput { pp_prob: Some(0.2), ..input(1.0, 0.0, 0.0) };
        assert!(!detect_one(&i, 1.0, &th, &head).is_pp);
        i.pp_prob = Some(0.4);
        assert!(detect_one(&i, 1.0, &th, &head).is_pp);

        let oracle = DetectOptions { weights, oracle_weights: true, ..Default::default() };
        assert!(!detect_one(&input(1.0, 0.0, 0.0), 1.0, &th, &oracle).is_pp);
        let pos = DetectInput { truth_pp: true, ..input(1.0, 0.0, 0.0) };
        assert!(detect_one(&pos, 1.0, &th, &oracle).is_pp);
    }

    #[test]
    fn avoidance_examples() {
        let th = ControlThresholds::default();
        let a = avoid(&AvoidInput { y_p: 30.0, bearings_deg: &[40.0, 100.0], serving_rsrp_dbm: -90.0, is_pp: false }, &th, true)
            .unwrap();
        assert!(a.maway && a.safe);
        assert_eq!(a.decision, TriggerDecision::Suppress);

        let a = avoid(&AvoidInput { y_p: 1.0, bearings_deg: &[40.0, 100.0], serving_rsrp_dbm: -115.0, is_pp: false }, &th, true)
            .unwrap();
        assert!(!a.safe);
        assert_eq!(a.decision, TriggerDecision::Execute);

        let a = avoid(&AvoidInput { y_p: 30.0, bearings_deg: &[350.0, 10.0], serving_rsrp_dbm: -90.0, is_pp: false }, &th, true)
            .unwrap();
        assert!(!a.maway);
        assert_eq!(circular_diff_deg(350.0, 10.0), 20.0);

        let a = avoid(&AvoidInput { y_p: 30.0, bearings_deg: &[0.0, 45.0], serving_rsrp_dbm: -90.0, is_pp: false }, &th, true)
            .unwrap();
        assert!(!a.maway, "exactly 45 degrees is not moving away");

        let few = AvoidInput { y_p: 30.0, bearings_deg: &[0.0], serving_rsrp_dbm: -90.0, is_pp: false };
        assert_eq!(avoid(&few, &th, true), Err(ControlError::TooFewBearings(1)));
    }

    #[test]
    fn bearing_off_disables_moving_away() {
        let th = ControlThresholds::default();
        let a = avoid(&AvoidInput { y_p: 30.0, bearings_deg: &[0.0, 180.0], serving_rsrp_dbm: -90.0, is_pp: false }, &th, false)
            .unwrap();
        assert!(!a.maway);
        assert_eq!(a.decision, TriggerDecision::Execute);
    }

    #[test]
    fn threshold_validation() {
        let bad = ControlThresholds { tos_th_s: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let nan = ControlThresholds { theta_rsrp_dbm: f64::NAN, ..Default::default() };
        assert!(nan.validate().is_err());
    }
}
