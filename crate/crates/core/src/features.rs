//! Sequence windows for the predictors.
//!
//! Every handover trigger with enough history yields one [`SequenceWindow`]:
//! `seq_len` consecutive samples ending at the trigger sample. Rows are built
//! from the point of view of the cell being left.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::a3::{HandoverLog, UNMEASURED_RSRP_DBM};
use crate::trace::{one_hot, DriveTrace, MeasurementRecord, SNR_RANGE};

pub const DEFAULT_SEQ_LEN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("need at least 2 samples for a slope, got {0}")]
    TooShort(usize),
    #[error("sample spacing must be positive")]
    NonPositiveSpacing,
    #[error("cannot fit normalisation on an empty training set")]
    EmptyTrainSet,
    #[error("class weights need both classes present")]
    SingleClass,
    #[error("need at least 10 windows to split, got {0}")]
    TooFewWindows(usize),
    #[error("invalid split ratios {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("sequence length must be at least 2, got {0}")]
    SeqLenTooShort(usize),
    #[error("window has {got} features, normalisation expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureMode {
    RsrpOnly,
    All,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::RsrpOnly => "rsrp",
            FeatureMode::All => "all",
        }
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureMode::RsrpOnly => &RSRP_ONLY_FEATURES,
            FeatureMode::All => &ALL_FEATURES,
        }
    }

    pub fn feature_count(self) -> usize {
        self.feature_names().len()
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rsrp" | "rsrp_only" => Ok(FeatureMode::RsrpOnly),
            "all" => Ok(FeatureMode::All),
            other => Err(format!("unknown feature mode `{other}` (expected rsrp or all)")),
        }
    }
}

pub const RSRP_ONLY_FEATURES: [&str; 2] = ["serving_rsrp", "best_neighbor_rsrp"];

pub const ALL_FEATURES: [&str; 16] = [
    "serving_rsrp",
    "best_neighbor_rsrp",
    "serving_snr",
    "rsrp_slope",
    "snr_slope",
    "session_elapsed_s",
    "bearing_sin",
    "bearing_cos",
    "speed_mps",
    "time_on_cell_s",
    "session_ftp",
    "session_video",
    "session_http",
    "mobility_walk",
    "mobility_shuttle",
    "mobility_brt",
];

/// Raw measurements at the trigger, kept beside the (scaled) features for
/// the detection and avoidance rules.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerContext {
    pub trigger_ts_ms: i64,
    pub source_cell_id: u32,
    pub target_cell_id: u32,
    pub serving_rsrp_dbm: f64,
    /// Last-step slopes in dB/s.
    pub rsrp_slope: f64,
    pub snr_slope: f64,
    /// Bearings of every window row, oldest first.
    pub bearings_deg: Vec<f64>,
    pub row_ts_ms: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    /// `seq_len` rows, oldest first; the last row is the trigger sample.
    pub features: Vec<Vec<f64>>,
    pub target_tos_s: f64,
    /// The stay was cut short by the end of the trace; `target_tos_s` is a
    /// lower bound and the window is not used for training.
    pub censored: bool,
    pub target_pp: bool,
    pub event_index: usize,
    pub context: TriggerContext,
}

impl SequenceWindow {
    pub fn seq_len(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Difference quotient of consecutive samples.
pub fn slope(series: &[f64], dt_s: f64) -> Result<Vec<f64>, FeatureError> {
    if series.len() < 2 {
        return Err(FeatureError::TooShort(series.len()));
    }
    if !(dt_s > 0.0) {
        return Err(FeatureError::NonPositiveSpacing);
    }
    Ok(series.windows(2).map(|w| (w[1] - w[0]) / dt_s).collect())
}

/// Per-sample values shared by every window over the same trace.
pub struct TraceFeatures<'a> {
    trace: &'a DriveTrace,
    session_start_ms: Vec<i64>,
    dt_s: f64,
}

impl<'a> TraceFeatures<'a> {
    pub fn new(trace: &'a DriveTrace) -> Self {
        let mut session_start_ms = Vec::with_capacity(trace.len());
        for (i, r) in trace.records.iter().enumerate() {
            let start = if i > 0 && trace.records[i - 1].session == r.session {
                session_start_ms[i - 1]
            } else {
                r.ts_ms
            };
            session_start_ms.push(start);
        }
        Self { trace, session_start_ms, dt_s: trace.sample_period_ms as f64 / 1000.0 }
    }

    pub fn trace(&self) -> &DriveTrace {
        self.trace
    }

    fn serving_rsrp(r: &MeasurementRecord, cell: u32) -> f64 {
        r.rsrp_of(cell).unwrap_or(UNMEASURED_RSRP_DBM)
    }

    fn serving_snr(r: &MeasurementRecord, cell: u32) -> f64 {
        r.cell(cell).and_then(|c| c.snr_db).unwrap_or(SNR_RANGE.0)
    }

    fn best_neighbor(r: &MeasurementRecord, cell: u32) -> f64 {
        r.cells()
            .filter(|c| c.cell_id != cell)
            .filter_map(|c| c.rsrp_dbm)
            .fold(UNMEASURED_RSRP_DBM, f64::max)
    }

    /// Builds the window ending at `sample` as seen from `source`, or `None`
    /// when fewer than `seq_len` samples are available.
    pub fn window_at(
        &self,
        mode: FeatureMode,
        seq_len: usize,
        sample: usize,
        source: u32,
        target: u32,
        last_handover_ts_ms: Option<i64>,
    ) -> Option<(Vec<Vec<f64>>, TriggerContext)> {
        if seq_len < 2 || sample + 1 < seq_len || sample >= self.trace.len() {
            return None;
        }
        let recs = &self.trace.records;
        let first = sample + 1 - seq_len;
        let trace_start = recs[0].ts_ms;
        let stay_start = last_handover_ts_ms.unwrap_or(trace_start);
        let slope_at = |k: usize, f: &dyn Fn(&MeasurementRecord) -> f64| {
            if k == 0 {
                0.0
            } else {
                (f(&recs[k]) - f(&recs[k - 1])) / self.dt_s
            }
        };
        let rsrp = |r: &MeasurementRecord| Self::serving_rsrp(r, source);
        let snr = |r: &MeasurementRecord| Self::serving_snr(r, source);

        let mut rows = Vec::with_capacity(seq_len);
        for k in first..=sample {
            let r = &recs[k];
            let mut row = vec![rsrp(r), Self::best_neighbor(r, source)];
            if mode == FeatureMode::All {
                let b = r.bearing_deg.to_radians();
                row.extend_from_slice(&[
                    snr(r),
                    slope_at(k, &rsrp),
                    slope_at(k, &snr),
                    (r.ts_ms - self.session_start_ms[k]) as f64 / 1000.0,
                    b.sin(),
                    b.cos(),
                    r.speed_mps,
                    ((r.ts_ms - stay_start).max(0)) as f64 / 1000.0,
                ]);
                row.extend_from_slice(&one_hot(r));
            }
            rows.push(row);
        }
        let last = &recs[sample];
        let context = TriggerContext {
            trigger_ts_ms: last.ts_ms,
            source_cell_id: source,
            target_cell_id: target,
            serving_rsrp_dbm: rsrp(last),
            rsrp_slope: slope_at(sample, &rsrp),
            snr_slope: slope_at(sample, &snr),
            bearings_deg: recs[first..=sample].iter().map(|r| r.bearing_deg).collect(),
            row_ts_ms: recs[first..=sample].iter().map(|r| r.ts_ms).collect(),
        };
        Some((rows, context))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<SequenceWindow>,
    /// Events skipped for lack of history.
    pub skipped: usize,
}

/// One window per executed event of a labelled log.
pub fn build_windows(trace: &DriveTrace, log: &HandoverLog, mode: FeatureMode, seq_len: usize) -> WindowSet {
    let tf = TraceFeatures::new(trace);
    let mut windows = Vec::new();
    let mut skipped = 0;
    let mut last_ho: Option<i64> = None;
    let end_ts = trace.records.last().map_or(0, |r| r.ts_ms);
    for e in log.events.iter().filter(|e| e.executed) {
        match tf.window_at(mode, seq_len, e.sample, e.source_cell_id, e.target_cell_id, last_ho) {
            Some((features, context)) => {
                let (target_tos_s, censored) = match e.tos_s {
                    Some(t) => (t, false),
                    None => ((end_ts - e.trigger_ts_ms) as f64 / 1000.0, true),
                };
                windows.push(SequenceWindow {
                    features,
                    target_tos_s,
                    censored,
                    target_pp: e.pp_flag,
                    event_index: e.index,
                    context,
                });
            }
            None => skipped += 1,
        }
        last_ho = Some(e.trigger_ts_ms);
    }
    WindowSet { windows, skipped }
}

/// Per-feature min/max fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    pub seq_len: usize,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl FeatureSpec {
    pub fn scale(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn scale_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FeatureError> {
        rows.iter()
            .map(|row| {
                if row.len() != self.mins.len() {
                    return Err(FeatureError::DimensionMismatch { expected: self.mins.len(), got: row.len() });
                }
                Ok(row.iter().enumerate().map(|(j, &x)| self.scale(j, x)).collect())
            })
            .collect()
    }
}

pub fn fit_minmax(train: &[SequenceWindow], mode: FeatureMode) -> Result<FeatureSpec, FeatureError> {
    let first = train.first().ok_or(FeatureError::EmptyTrainSet)?;
    let dim = first.feature_dim();
    let mut mins = vec![f64::INFINITY; dim];
    let mut maxs = vec![f64::NEG_INFINITY; dim];
    for w in train {
        for row in &w.features {
            if row.len() != dim {
                return Err(FeatureError::DimensionMismatch { expected: dim, got: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                mins[j] = mins[j].min(x);
                maxs[j] = maxs[j].max(x);
            }
        }
    }
    Ok(FeatureSpec { mode, seq_len: first.seq_len(), mins, maxs })
}

pub fn apply_minmax(spec: &FeatureSpec, windows: &[SequenceWindow]) -> Result<Vec<SequenceWindow>, FeatureError> {
    windows
        .iter()
        .map(|w| {
            Ok(SequenceWindow { features: spec.scale_rows(&w.features)?, ..w.clone() })
        })
        .collect()
}

/// Inverse-frequency class weights, `w_c = N / (2 N_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub negative: f64,
    pub positive: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { negative: 1.0, positive: 1.0 };

    pub fn get(&self, label: bool) -> f64 {
        if label {
            self.positive
        } else {
            self.negative
        }
    }

    pub fn as_map(&self) -> BTreeMap<u8, f64> {
        BTreeMap::from([(0, self.negative), (1, self.positive)])
    }
}

pub fn class_weights(labels: &[bool]) -> Result<ClassWeights, FeatureError> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(FeatureError::SingleClass);
    }
    Ok(ClassWeights { negative: n / (2.0 * neg), positive: n / (2.0 * pos) })
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.70, 0.15, 0.15];

pub type Split<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Contiguous train/validation/test partitions: train and validation sizes are
/// floored, the test split takes the remainder.
pub fn chronological_split<T: Clone>(items: &[T], ratios: [f64; 3]) -> Result<Split<T>, FeatureError> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(FeatureError::InvalidRatios(ratios));
    }
    let n = items.len();
    if n < 10 {
        return Err(FeatureError::TooFewWindows(n));
    }
    // the epsilon keeps e.g. 0.7 * 100 from flooring to 69
    let n_train = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let n_val = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let train = items[..n_train].to_vec();
    let val = items[n_train..n_train + n_val].to_vec();
    let test = items[n_train + n_val..].to_vec();
    Ok((train, val, test))
}

/// One CSV row per window row, tagged with the window id.
pub fn windows_to_csv(windows: &[SequenceWindow], mode: FeatureMode) -> String {
    let mut out = String::from("window,event,row,ts_ms,");
    out.push_str(&mode.feature_names().join(","));
    out.push_str(",target_tos_s,censored,target_pp\n");
    for (w_id, w) in windows.iter().enumerate() {
        for (r, row) in w.features.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{w_id},{},{r},{},{},{},{},{}\n",
                w.event_index,
                w.context.row_ts_ms[r],
                vals.join(","),
                w.target_tos_s,
                w.censored as u8,
                w.target_pp as u8
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a3::HandoverEvent;
    use crate::trace::tests::record;

    #[test]
    fn slope_examples() {
        assert_eq!(slope(&[-100.0, -98.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(slope(&[-90.0, -93.0, -96.0], 1.0).unwrap(), vec![-3.0, -3.0]);
        assert_eq!(slope(&[-90.0; 5], 0.5).unwrap(), vec![0.0; 4]);
        assert_eq!(slope(&[1.0], 1.0), Err(FeatureError::TooShort(1)));
    }

    fn ramp_trace(n: usize) -> DriveTrace {
        let rows = (0..n).map(|i| record(i as i64 * 1000, (1, -100.0 + i as f64 * 0.1), &[(2, -110.0)])).collect();
        DriveTrace::new(rows, 1000).unwrap()
    }

    fn log_at(samples: &[usize]) -> HandoverLog {
        HandoverLog {
            initial_cell_id: 1,
            events: samples
                .iter()
                .enumerate()
                .map(|(i, &s)| HandoverEvent {
                    index: i,
                    trigger_ts_ms: s as i64 * 1000,
                    sample: s,
                    source_cell_id: if i % 2 == 0 { 1 } else { 2 },
                    target_cell_id: if i % 2 == 0 { 2 } else { 1 },
                    tos_s: Some(1.0),
                    pp_flag: false,
                    executed: true,
                })
                .collect(),
            trace_duration_s: 0.0,
        }
    }

    #[test]
    fn empty_log_gives_no_windows() {
        let ws = build_windows(&ramp_trace(50), &log_at(&[]), FeatureMode::All, 10);
        assert!(ws.windows.is_empty());
        assert_eq!(ws.skipped, 0);
    }

    #[test]
    fn short_history_is_skipped() {
        let ws = build_windows(&ramp_trace(50), &log_at(&[3]), FeatureMode::All, 10);
        assert_eq!((ws.windows.len(), ws.skipped), (0, 1));
    }

    #[test]
    fn window_rows_end_at_trigger() {
        let ws = build_windows(&ramp_trace(150), &log_at(&[100]), FeatureMode::RsrpOnly, 10);
        let w = &ws.windows[0];
        let expect: Vec<i64> = (91..=100).map(|s| s * 1000).collect();
        assert_eq!(w.context.row_ts_ms, expect);
        assert_eq!(w.features.len(), 10);
        assert!((w.features[9][0] - (-100.0 + 10.0)).abs() < 1e-9);
        assert_eq!(w.features[9][1], -110.0);
    }

    #[test]
    fn all_mode_layout() {
        let ws = build_windows(&ramp_trace(30), &log_at(&[20]), FeatureMode::All, 5);
        let w = &ws.windows[0];
        assert_eq!(w.feature_dim(), ALL_FEATURES.len());
        // rsrp slope of a 0.1 dB/s ramp
        assert!((w.features[4][3] - 0.1).abs() < 1e-9);
        // time on cell since trace start
        assert_eq!(w.features[4][9], 20.0);
        assert!((w.context.rsrp_slope - 0.1).abs() < 1e-9);
    }

    fn window_with(values: &[f64]) -> SequenceWindow {
        SequenceWindow {
            features: values.iter().map(|v| vec![*v, 7.0]).collect(),
            target_tos_s: 1.0,
            censored: false,
            target_pp: false,
            event_index: 0,
            context: TriggerContext {
                trigger_ts_ms: 0,
                source_cell_id: 1,
                target_cell_id: 2,
                serving_rsrp_dbm: -90.0,
                rsrp_slope: 0.0,
                snr_slope: 0.0,
                bearings_deg: vec![0.0; values.len()],
                row_ts_ms: (0..values.len() as i64).collect(),
            },
        }
    }

    #[test]
    fn minmax_examples() {
        let spec = fit_minmax(&[window_with(&[-120.0, -80.0])], FeatureMode::RsrpOnly).unwrap();
        assert_eq!(spec.scale(0, -100.0), 0.5);
        assert_eq!(spec.scale(0, -130.0), 0.0);
        // constant second feature
        assert_eq!(spec.scale(1, 7.0), 0.0);
        assert_eq!(fit_minmax(&[], FeatureMode::All), Err(FeatureError::EmptyTrainSet));
    }

    #[test]
    fn class_weight_examples() {
        let balanced: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert_eq!(class_weights(&balanced).unwrap(), ClassWeights::UNIT);
        let mut skewed = vec![false; 90];
        skewed.extend(vec![true; 10]);
        let w = class_weights(&skewed).unwrap();
        assert!((w.negative - 100.0 / 180.0).abs() < 1e-12);
        assert!((w.positive - 5.0).abs() < 1e-12);
        assert_eq!(class_weights(&[true, true]), Err(FeatureError::SingleClass));
    }

    #[test]
    fn split_examples() {
        let items: Vec<usize> = (0..100).collect();
        let (a, b, c) = chronological_split(&items, DEFAULT_SPLIT).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 15, 15));
        assert_eq!(b[0], 70);
        let (a, b, c) = chronological_split(&items[..10], DEFAULT_SPLIT).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7, 1, 2));
        assert_eq!(chronological_split(&items[..5], DEFAULT_SPLIT), Err(FeatureError::TooFewWindows(5)));
    }
}
