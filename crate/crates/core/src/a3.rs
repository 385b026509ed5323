//! Event-A3 handover state machine, Time-of-Stay and ping-pong labelling.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::trace::{DriveTrace, RSRP_RANGE};

pub const DEFAULT_HYSTERESIS_DB: f64 = 3.0;
pub const DEFAULT_TTT_MS: i64 = 320;
pub const DEFAULT_T_PP_S: f64 = 5.0;

/// RSRP assumed for the serving cell at samples where it was not measured.
pub const UNMEASURED_RSRP_DBM: f64 = RSRP_RANGE.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum A3Error {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("invalid A3 parameters: {0}")]
    InvalidParams(String),
    #[error("record {0} has missing RSRP; repair the trace first")]
    MissingRsrp(usize),
    #[error("malformed handover log: {0}")]
    MalformedLog(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A3Params {
    pub hysteresis_db: f64,
    pub ttt_ms: i64,
    pub t_pp_s: f64,
}

impl Default for A3Params {
    fn default() -> Self {
        Self { hysteresis_db: DEFAULT_HYSTERESIS_DB, ttt_ms: DEFAULT_TTT_MS, t_pp_s: DEFAULT_T_PP_S }
    }
}

impl A3Params {
    pub fn validate(&self) -> Result<(), A3Error> {
        if !(self.hysteresis_db >= 0.0) || !self.hysteresis_db.is_finite() {
            return Err(A3Error::InvalidParams(format!("hysteresis_db {} must be >= 0", self.hysteresis_db)));
        }
        if self.ttt_ms < 0 {
            return Err(A3Error::InvalidParams(format!("ttt_ms {} must be >= 0", self.ttt_ms)));
        }
        if !(self.t_pp_s > 0.0) || !self.t_pp_s.is_finite() {
            return Err(A3Error::InvalidParams(format!("t_pp_s {} must be > 0", self.t_pp_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverEvent {
    pub index: usize,
    pub trigger_ts_ms: i64,
    /// Sample index of the trigger in the originating trace.
    pub sample: usize,
    pub source_cell_id: u32,
    pub target_cell_id: u32,
    /// `None` while unknown or when censored by the end of the trace.
    pub tos_s: Option<f64>,
    pub pp_flag: bool,
    pub executed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverLog {
    pub initial_cell_id: u32,
    pub events: Vec<HandoverEvent>,
    pub trace_duration_s: f64,
}

impl HandoverLog {
    pub fn executed(&self) -> impl Iterator<Item = &HandoverEvent> {
        self.events.iter().filter(|e| e.executed)
    }

    pub fn executed_count(&self) -> usize {
        self.executed().count()
    }

    pub fn suppressed_count(&self) -> usize {
        self.events.len() - self.executed_count()
    }

    pub fn ping_pong_count(&self) -> usize {
        self.executed().filter(|e| e.pp_flag).count()
    }

    /// Non-censored stays of executed events.
    pub fn stays(&self) -> Vec<f64> {
        self.executed().filter_map(|e| e.tos_s).collect()
    }

    pub fn mean_tos_s(&self) -> Option<f64> {
        let stays = self.stays();
        (!stays.is_empty()).then(|| stays.iter().sum::<f64>() / stays.len() as f64)
    }

    /// Checks that executed events chain source to target.
    pub fn check_chain(&self) -> Result<(), A3Error> {
        let mut serving = self.initial_cell_id;
        for e in &self.events {
            if e.source_cell_id == e.target_cell_id {
                return Err(A3Error::MalformedLog(format!("event {} has source == target", e.index)));
            }
            if e.source_cell_id != serving {
                return Err(A3Error::MalformedLog(format!(
                    "event {} leaves {} but serving is {}",
                    e.index, e.source_cell_id, serving
                )));
            }
            if e.executed {
                serving = e.target_cell_id;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,trigger_ts_ms,source,target,tos_s,pp,executed\n");
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.index,
                e.trigger_ts_ms,
                e.source_cell_id,
                e.target_cell_id,
                e.tos_s.map(|t| t.to_string()).unwrap_or_default(),
                e.pp_flag as u8,
                e.executed as u8,
            ));
        }
        out
    }

    /// Reads a log written by [`HandoverLog::to_csv`]. Sample indices are
    /// recovered from the trace the log was produced on.
    pub fn from_csv(text: &str, trace: &DriveTrace) -> Result<Self, A3Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| A3Error::MalformedLog("empty file".into()))?;
        if header.trim_end_matches('\r') != "i,trigger_ts_ms,source,target,tos_s,pp,executed" {
            return Err(A3Error::MalformedLog(format!("unexpected header `{header}`")));
        }
        let bad = |row: usize, what: &str| A3Error::MalformedLog(format!("row {row}: bad {what}"));
        let mut events = Vec::new();
        for (row, line) in lines.enumerate() {
            let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
            if f.len() != 7 {
                return Err(bad(row, "field count"));
            }
            let trigger_ts_ms: i64 = f[1].parse().map_err(|_| bad(row, "trigger_ts_ms"))?;
            let sample = trace.index_of_ts(trigger_ts_ms).ok_or_else(|| bad(row, "timestamp (not in trace)"))?;
            events.push(HandoverEvent {
                index: f[0].parse().map_err(|_| bad(row, "i"))?,
                trigger_ts_ms,
                sample,
                source_cell_id: f[2].parse().map_err(|_| bad(row, "source"))?,
                target_cell_id: f[3].parse().map_err(|_| bad(row, "target"))?,
                tos_s: if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| bad(row, "tos_s"))?) },
                pp_flag: f[5] == "1",
                executed: f[6] == "1",
            });
        }
        let initial_cell_id = match events.first() {
            Some(e) => e.source_cell_id,
            None => initial_cell(trace)?,
        };
        Ok(Self { initial_cell_id, events, trace_duration_s: trace.duration_s() })
    }
}

/// What happens when a neighbour's TTT expires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerDecision {
    Execute,
    /// Stay on the serving cell and restart the neighbour's TTT.
    Suppress,
}

/// A neighbour whose A3 condition has held for the full TTT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub sample: usize,
    pub ts_ms: i64,
    pub source_cell_id: u32,
    pub target_cell_id: u32,
    pub serving_rsrp_dbm: f64,
    pub target_rsrp_dbm: f64,
    /// Timestamp of the last executed handover, if any.
    pub last_handover_ts_ms: Option<i64>,
}

/// Cell strongest at the first sample (ties go to the lower cell id).
pub fn initial_cell(trace: &DriveTrace) -> Result<u32, A3Error> {
    let first = trace.records.first().ok_or(A3Error::EmptyTrace)?;
    let mut best: Option<(u32, f64)> = None;
    for c in first.cells() {
        let p = c.rsrp_dbm.ok_or(A3Error::MissingRsrp(0))?;
        best = match best {
            Some((id, bp)) if bp > p || (bp == p && id < c.cell_id) => Some((id, bp)),
            _ => Some((c.cell_id, p)),
        };
    }
    Ok(best.expect("record has a serving cell").0)
}

/// Runs the A3 state machine, asking `policy` what to do at each TTT expiry.
///
/// The returned log has no ToS or ping-pong labels yet.
pub fn run_a3_with<F>(trace: &DriveTrace, params: &A3Params, mut policy: F) -> Result<HandoverLog, A3Error>
where
    F: FnMut(&Trigger) -> TriggerDecision,
{
    params.validate()?;
    let mut serving = initial_cell(trace)?;
    // neighbour -> timestamp at which its A3 condition started holding
    let mut timers: BTreeMap<u32, i64> = BTreeMap::new();
    let mut events = Vec::new();
    let mut last_ho: Option<i64> = None;

    for (k, rec) in trace.records.iter().enumerate() {
        let mut cells = Vec::with_capacity(rec.neighbors.len() + 1);
        for c in rec.cells() {
            cells.push((c.cell_id, c.rsrp_dbm.ok_or(A3Error::MissingRsrp(k))?));
        }
        let serving_rsrp = cells
            .iter()
            .find(|(id, _)| *id == serving)
            .map(|(_, p)| *p)
            .unwrap_or(UNMEASURED_RSRP_DBM);

        // drop timers of neighbours that are no longer better or not measured
        timers.retain(|id, _| {
            cells.iter().any(|(cid, p)| cid == id && *p > serving_rsrp + params.hysteresis_db)
        });
        let mut expired: Vec<(u32, f64)> = Vec::new();
        for &(id, p) in &cells {
            if id == serving || p <= serving_rsrp + params.hysteresis_db {
                continue;
            }
            let start = *timers.entry(id).or_insert(rec.ts_ms);
            if rec.ts_ms - start >= params.ttt_ms {
                expired.push((id, p));
            }
        }
        // strongest first, ties to the lower id
        expired.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        for (target, target_rsrp) in expired {
            let trig = Trigger {
                sample: k,
                ts_ms: rec.ts_ms,
                source_cell_id: serving,
                target_cell_id: target,
                serving_rsrp_dbm: serving_rsrp,
                target_rsrp_dbm: target_rsrp,
                last_handover_ts_ms: last_ho,
            };
            let decision = policy(&trig);
            events.push(HandoverEvent {
                index: events.len(),
                trigger_ts_ms: rec.ts_ms,
                sample: k,
                source_cell_id: serving,
                target_cell_id: target,
                tos_s: None,
                pp_flag: false,
                executed: decision == TriggerDecision::Execute,
            });
            match decision {
                TriggerDecision::Execute => {
                    serving = target;
                    timers.clear();
                    last_ho = Some(rec.ts_ms);
                    break;
                }
                TriggerDecision::Suppress => {
                    timers.remove(&target);
                }
            }
        }
    }
    Ok(HandoverLog {
        initial_cell_id: initial_cell(trace)?,
        events,
        trace_duration_s: trace.duration_s(),
    })
}

/// Baseline A3: every trigger executes.
pub fn run_a3(trace: &DriveTrace, params: &A3Params) -> Result<HandoverLog, A3Error> {
    run_a3_with(trace, params, |_| TriggerDecision::Execute)
}

/// Fills `tos_s` for executed events; the last executed stay is censored.
/// Suppressed events carry no ToS.
pub fn compute_tos(log: &HandoverLog) -> HandoverLog {
    let mut out = log.clone();
    let executed: Vec<usize> = out.events.iter().enumerate().filter(|(_, e)| e.executed).map(|(i, _)| i).collect();
    for e in &mut out.events {
        e.tos_s = None;
    }
    for pair in executed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dt = out.events[b].trigger_ts_ms - out.events[a].trigger_ts_ms;
        out.events[a].tos_s = Some(dt as f64 / 1000.0);
    }
    out
}

/// Marks an executed event A->B as ping-pong when the next executed event
/// returns B->A and the stay on B was shorter than `t_pp_s`.
pub fn label_ping_pong(log: &HandoverLog, t_pp_s: f64) -> HandoverLog {
    let mut out = log.clone();
    let executed: Vec<usize> = out.events.iter().enumerate().filter(|(_, e)| e.executed).map(|(i, _)| i).collect();
    for e in &mut out.events {
        e.pp_flag = false;
    }
    for pair in executed.windows(2) {
        let (a, b) = (&out.events[pair[0]], &out.events[pair[1]]);
        let returns = b.source_cell_id == a.target_cell_id && b.target_cell_id == a.source_cell_id;
        let short = a.tos_s.is_some_and(|t| t < t_pp_s);
        if returns && short {
            out.events[pair[0]].pp_flag = true;
        }
    }
    out
}

/// `run_a3` followed by ToS and ping-pong labelling.
pub fn baseline_log(trace: &DriveTrace, params: &A3Params) -> Result<HandoverLog, A3Error> {
    let log = run_a3(trace, params)?;
    Ok(label_ping_pong(&compute_tos(&log), params.t_pp_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::tests::record;

    fn trace_of(samples: &[(f64, f64)], period: i64) -> DriveTrace {
        let rows = samples
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| record(i as i64 * period, (1, a), &[(2, b)]))
            .collect();
        DriveTrace::new(rows, period).unwrap()
    }

    #[test]
    fn weaker_neighbor_never_triggers() {
        let t = trace_of(&vec![(-90.0, -100.0); 20], 100);
        assert!(run_a3(&t, &A3Params::default()).unwrap().events.is_empty());
    }

    #[test]
    fn hand_traced_single_handover() {
        // sample 0: serving strongest; from sample 1 neighbour is 5 dB better.
        let mut s = vec![(-95.0, -96.0)];
        s.extend(vec![(-95.0, -90.0); 9]);
        let t = trace_of(&s, 1000);
        // the first sample at which the condition holds starts the timer, the
        // second completes a 1000 ms TTT
        let p = A3Params { hysteresis_db: 3.0, ttt_ms: 1000, t_pp_s: 5.0 };
        let log = run_a3(&t, &p).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].sample, 2);
        assert_eq!((log.events[0].source_cell_id, log.events[0].target_cell_id), (1, 2));
    }

    #[test]
    fn condition_break_resets_timer() {
        let s = vec![(-95.0, -96.0), (-95.0, -90.0), (-95.0, -93.0), (-95.0, -90.0), (-95.0, -90.0)];
        let p = A3Params { hysteresis_db: 3.0, ttt_ms: 1000, t_pp_s: 5.0 };
        let log = run_a3(&trace_of(&s, 1000), &p).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].sample, 4);
    }

    #[test]
    fn hysteresis_is_strict() {
        let s = vec![(-95.0, -96.0), (-95.0, -92.0), (-95.0, -92.0)];
        let p = A3Params { hysteresis_db: 3.0, ttt_ms: 0, t_pp_s: 5.0 };
        assert!(run_a3(&trace_of(&s, 1000), &p).unwrap().events.is_empty());
    }

    #[test]
    fn simultaneous_expiry_prefers_stronger_then_lower_id() {
        let rows = vec![
            record(0, (1, -80.0), &[(3, -90.0), (2, -90.0)]),
            record(100, (1, -80.0), &[(3, -70.0), (2, -70.0)]),
        ];
        let t = DriveTrace::new(rows, 100).unwrap();
        let p = A3Params { hysteresis_db: 3.0, ttt_ms: 0, t_pp_s: 5.0 };
        let log = run_a3(&t, &p).unwrap();
        assert_eq!(log.events[0].target_cell_id, 2);
    }

    fn log_of(events: &[(i64, u32, u32)]) -> HandoverLog {
        HandoverLog {
            initial_cell_id: events.first().map(|e| e.1).unwrap_or(1),
            events: events
                .iter()
                .enumerate()
                .map(|(i, &(ts, s, d))| HandoverEvent {
                    index: i,
                    trigger_ts_ms: ts,
                    sample: i,
                    source_cell_id: s,
                    target_cell_id: d,
                    tos_s: None,
                    pp_flag: false,
                    executed: true,
                })
                .collect(),
            trace_duration_s: 1000.0,
        }
    }

    #[test]
    fn tos_examples() {
        let log = compute_tos(&log_of(&[(10_000, 1, 2), (13_000, 2, 1)]));
        assert_eq!(log.events[0].tos_s, Some(3.0));
        assert_eq!(log.events[1].tos_s, None);
        let single = compute_tos(&log_of(&[(10_000, 1, 2)]));
        assert_eq!(single.events[0].tos_s, None);
        let empty = log_of(&[]);
        assert_eq!(compute_tos(&empty), empty);
    }

    #[test]
    fn ping_pong_examples() {
        let l = label_ping_pong(&compute_tos(&log_of(&[(100_000, 1, 2), (103_000, 2, 1)])), 5.0);
        assert!(l.events[0].pp_flag);
        let l = label_ping_pong(&compute_tos(&log_of(&[(100_000, 1, 2), (103_000, 2, 3)])), 5.0);
        assert!(!l.events[0].pp_flag);
        let l = label_ping_pong(&compute_tos(&log_of(&[(100_000, 1, 2), (110_000, 2, 1)])), 5.0);
        assert!(!l.events[0].pp_flag);
    }

    #[test]
    fn csv_round_trip() {
        let s: Vec<(f64, f64)> = (0..40).map(|i| if (i / 5) % 2 == 0 { (-90.0, -99.0) } else { (-99.0, -90.0) }).collect();
        let t = trace_of(&s, 100);
        let log = baseline_log(&t, &A3Params::default()).unwrap();
        assert!(!log.events.is_empty());
        let back = HandoverLog::from_csv(&log.to_csv(), &t).unwrap();
        assert_eq!(back, log);
        log.check_chain().unwrap();
    }

    #[test]
    fn invalid_params_rejected() {
        let t = trace_of(&[(-90.0, -99.0)], 100);
        let p = A3Params { hysteresis_db: -1.0, ..A3Params::default() };
        assert!(matches!(run_a3(&t, &p), Err(A3Error::InvalidParams(_))));
    }
}
