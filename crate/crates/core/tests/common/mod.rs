//! Reference implementations and generators shared by the test targets.
#![allow(dead_code)]

use hoseq::trace::{CellMeasurement, DriveTrace, MeasurementRecord, Mobility, Operator, Session, MAX_NEIGHBORS};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn record(ts_ms: i64, cells: &[(u32, f64)]) -> MeasurementRecord {
    let mut ms = cells.iter().map(|&(id, p)| CellMeasurement::new(id, p, -10.0, 10.0));
    MeasurementRecord {
        ts_ms,
        operator: Operator::A,
        lat_deg: 0.0,
        lon_deg: 0.0,
        speed_mps: 5.0,
        bearing_deg: 0.0,
        session: Session::Ftp,
        mobility: Mobility::Walk,
        serving: ms.next().expect("at least one cell"),
        neighbors: ms.collect(),
    }
}

/// Random-walk RSRP for `cells` cells; each sample measures a random subset of
/// at most `MAX_NEIGHBORS + 1` of them. Values are rounded to 0.5 dB so ties
/// actually happen.
pub fn random_trace(r: &mut impl Rng, samples: usize, cells: u32, period_ms: i64) -> DriveTrace {
    let mut level: Vec<f64> = (0..cells).map(|_| r.random_range(-110.0..-70.0)).collect();
    let ids: Vec<u32> = (1..=cells).collect();
    let mut records = Vec::with_capacity(samples);
    for k in 0..samples {
        for l in level.iter_mut() {
            *l = (*l + r.random_range(-3.0..3.0)).clamp(-140.0, -44.0);
        }
        let mut present = ids.clone();
        present.shuffle(r);
        let keep = r.random_range(1..=present.len().min(MAX_NEIGHBORS + 1));
        present.truncate(keep);
        let cells: Vec<(u32, f64)> = present.iter().map(|&id| (id, (level[id as usize - 1] * 2.0).round() / 2.0)).collect();
        records.push(record(k as i64 * period_ms, &cells));
    }
    DriveTrace::new(records, period_ms).expect("valid trace")
}

/// Executed handovers `(sample, source, target)` by direct re-evaluation of
/// the entering condition over the history at every sample.
pub fn reference_a3(trace: &DriveTrace, hysteresis_db: f64, ttt_ms: i64) -> Vec<(usize, u32, u32)> {
    let recs = &trace.records;
    let rsrp = |k: usize, id: u32| recs[k].rsrp_of(id);
    let first = &recs[0];
    let mut serving = first
        .cells()
        .map(|c| (c.cell_id, c.rsrp_dbm.unwrap()))
        .fold(None, |best: Option<(u32, f64)>, (id, p)| match best {
            Some((bid, bp)) if bp > p || (bp == p && bid < id) => Some((bid, bp)),
            _ => Some((id, p)),
        })
        .unwrap()
        .0;
    // the condition only counts from the sample after the last handover
    let mut floor = 0usize;
    let mut out = Vec::new();
    for k in 0..recs.len() {
        let holds = |j: usize, id: u32| -> bool {
            let s = rsrp(j, serving).unwrap_or(-140.0);
            id != serving && rsrp(j, id).is_some_and(|p| p > s + hysteresis_db)
        };
        let mut best: Option<(u32, f64)> = None;
        for c in recs[k].cells() {
            let id = c.cell_id;
            if !holds(k, id) {
                continue;
            }
            let mut start = k;
            while start > floor && holds(start - 1, id) {
                start -= 1;
            }
            if recs[k].ts_ms - recs[start].ts_ms < ttt_ms {
                continue;
            }
            let p = rsrp(k, id).unwrap();
            best = match best {
                Some((bid, bp)) if bp > p || (bp == p && bid < id) => Some((bid, bp)),
                _ => Some((id, p)),
            };
        }
        if let Some((target, _)) = best {
            out.push((k, serving, target));
            serving = target;
            floor = k + 1;
        }
    }
    out
}

/// Ping-pong flags for events `(ts_ms, source, target, executed)`: for every
/// executed event, scan all later events for the first executed one.
pub fn reference_pp(events: &[(i64, u32, u32, bool)], t_pp_s: f64) -> Vec<bool> {
    (0..events.len())
        .map(|i| {
            let (ta, sa, ga, ea) = events[i];
            if !ea {
                return false;
            }
            let next = (0..events.len()).filter(|&j| j > i && events[j].3).min();
            next.is_some_and(|j| {
                let (tb, sb, gb, _) = events[j];
                sb == ga && gb == sa && ((tb - ta) as f64 / 1000.0) < t_pp_s
            })
        })
        .collect()
}

/// Accuracy, precision, recall and F1 in percent from an explicit confusion
/// matrix; an undefined ratio counts as 0.
pub fn reference_scores(truth: &[bool], pred: &[bool]) -> [f64; 4] {
    let mut m = [[0usize; 2]; 2];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t as usize][p as usize] += 1;
    }
    let (tn, fp, fn_, tp) = (m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64);
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    [ratio(tp + tn, tn + fp + fn_ + tp) * 100.0, precision * 100.0, recall * 100.0, f1 * 100.0]
}
