//! Detection scores, reduction metrics, timings and the report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::a3::HandoverLog;
use crate::models::TrainHistory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {truth} labels vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no labels to score")]
    Empty,
    #[error("baseline has no handovers")]
    NoBaselineHandovers,
    #[error("no summaries to report")]
    NoSummaries,
    #[error("i/o error at {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("summary line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Scores in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1 in percent; an undefined ratio is 0.
pub fn classification_metrics(truth: &[bool], pred: &[bool]) -> Result<Classification, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    let precision = pct(tp, tp + fp);
    let recall = pct(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(Classification { accuracy: pct(correct, truth.len()), precision, recall, f1 })
}

/// Percent reduction of executed ping-pongs; `None` without baseline ping-pongs.
pub fn pp_reduction_pct(baseline_pp: usize, replayed_pp: usize) -> Option<f64> {
    (baseline_pp > 0).then(|| 100.0 * (baseline_pp as f64 - replayed_pp as f64) / baseline_pp as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reductions {
    pub pp_reduction_pct: Option<f64>,
    pub ho_reduction_pct: f64,
    /// `None` when either log has no uncensored stay.
    pub tos_gain_pct: Option<f64>,
    pub baseline_handovers: usize,
    pub replayed_handovers: usize,
    pub baseline_pp: usize,
    pub replayed_pp: usize,
}

/// Compares a replayed log against the baseline run over the same trace.
/// Only executed events count.
pub fn reduction_metrics(baseline: &HandoverLog, replayed: &HandoverLog) -> Result<Reductions, MetricsError> {
    let n_b = baseline.executed_count();
    if n_b == 0 {
        return Err(MetricsError::NoBaselineHandovers);
    }
    let n_r = replayed.executed_count();
    let (pp_b, pp_r) = (baseline.ping_pong_count(), replayed.ping_pong_count());
    let tos_gain_pct = match (baseline.mean_tos_s(), replayed.mean_tos_s()) {
        (Some(b), Some(r)) if b > 0.0 => Some(100.0 * (r - b) / b),
        _ => None,
    };
    Ok(Reductions {
        pp_reduction_pct: pp_reduction_pct(pp_b, pp_r),
        ho_reduction_pct: 100.0 * (n_b as f64 - n_r as f64) / n_b as f64,
        tos_gain_pct,
        baseline_handovers: n_b,
        replayed_handovers: n_r,
        baseline_pp: pp_b,
        replayed_pp: pp_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub train_s: f64,
    pub infer_total_s: f64,
    /// `None` when no event was scored.
    pub infer_per_event_s: Option<f64>,
    pub param_count: usize,
}

pub fn timing_capture(history: &TrainHistory, infer_total_s: f64, events: usize) -> Timing {
    Timing {
        train_s: history.wall_train_s,
        infer_total_s,
        infer_per_event_s: (events > 0).then(|| infer_total_s / events as f64),
        param_count: history.param_count,
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub kind: String,
    pub mode: String,
    pub detection: Option<Classification>,
    pub reductions: Reductions,
    pub timing: Timing,
}

pub const SUMMARY_HEADER: &str = "kind,mode,pp_reduction,pp_f1,ho_reduction,tos_gain,train_s,infer_s,params";

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.prec$}"))
}

/// `summary.csv` body. Wall-clock columns are `NA` unless `timings` is set,
/// which keeps the file byte-stable across runs.
pub fn summary_csv(summaries: &[MetricsSummary], timings: bool) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        let (train, infer) = if timings {
            (Some(s.timing.train_s), Some(s.timing.infer_total_s))
        } else {
            (None, None)
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{},{},{},{}",
            s.kind,
            s.mode,
            opt(s.reductions.pp_reduction_pct, 4),
            opt(s.detection.map(|d| d.f1), 4),
            s.reductions.ho_reduction_pct,
            opt(s.reductions.tos_gain_pct, 4),
            opt(train, 4),
            opt(infer, 6),
            s.timing.param_count
        );
    }
    out
}

pub fn timings_csv(summaries: &[MetricsSummary]) -> String {
    let mut out = String::from("kind,mode,train_s,infer_total_s,infer_per_event_s,params\n");
    for s in summaries {
        let t = &s.timing;
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.6},{},{}",
            s.kind,
            s.mode,
            t.train_s,
            t.infer_total_s,
            opt(t.infer_per_event_s, 9),
            t.param_count
        );
    }
    out
}

pub fn summary_txt(summaries: &[MetricsSummary], version: &str) -> String {
    let mut out = format!("hoseq {version}\n\n");
    let _ = writeln!(
        out,
        "{:<12} {:<5} {:>10} {:>8} {:>10} {:>9} {:>8} {:>8} {:>6} {:>6}",
        "kind", "mode", "pp_red%", "pp_f1%", "ho_red%", "tos_gain%", "ho_base", "ho_repl", "pp_b", "pp_r"
    );
    for s in summaries {
        let r = &s.reductions;
        let _ = writeln!(
            out,
            "{:<12} {:<5} {:>10} {:>8} {:>10.2} {:>9} {:>8} {:>8} {:>6} {:>6}",
            s.kind,
            s.mode,
            opt(r.pp_reduction_pct, 2),
            opt(s.detection.map(|d| d.f1), 2),
            r.ho_reduction_pct,
            opt(r.tos_gain_pct, 2),
            r.baseline_handovers,
            r.replayed_handovers,
            r.baseline_pp,
            r.replayed_pp
        );
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal-baseline bar chart; missing values render as an `NA` label.
pub fn bar_chart_svg(title: &str, bars: &[(String, Option<f64>)]) -> String {
    const BAR_W: f64 = 60.0;
    const GAP: f64 = 20.0;
    const PLOT_H: f64 = 200.0;
    const TOP: f64 = 40.0;
    let width = GAP + bars.len() as f64 * (BAR_W + GAP);
    let height = TOP + PLOT_H * 2.0 + 60.0;
    let zero_y = TOP + PLOT_H;
    let max_abs = bars.iter().filter_map(|b| b.1).map(f64::abs).fold(0.0, f64::max).max(1e-9);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, xml_escape(title));
    let _ = writeln!(svg, r#"<line x1="0" y1="{zero_y}" x2="{width}" y2="{zero_y}" stroke="black"/>"#);
    for (i, (label, value)) in bars.iter().enumerate() {
        let x = GAP + i as f64 * (BAR_W + GAP);
        let cx = x + BAR_W / 2.0;
        match value {
            Some(v) => {
                let h = v.abs() / max_abs * PLOT_H;
                let y = if *v >= 0.0 { zero_y - h } else { zero_y };
                let _ = writeln!(svg, r##"<rect x="{x}" y="{y:.3}" width="{BAR_W}" height="{h:.3}" fill="#4c72b0"/>"##);
                let ty = if *v >= 0.0 { y - 4.0 } else { y + h + 12.0 };
                let _ = writeln!(svg, r#"<text x="{cx}" y="{ty:.3}" text-anchor="middle">{v:.2}</text>"#);
            }
            None => {
                let _ = writeln!(svg, r#"<text x="{cx}" y="{}" text-anchor="middle">NA</text>"#, zero_y - 4.0);
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#,
            height - 20.0,
            xml_escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, text: &str) -> Result<(), MetricsError> {
    fs::write(path, text).map_err(|e| MetricsError::Io { path: path.display().to_string(), reason: e.to_string() })
}

/// One parsed line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: String,
    pub mode: String,
    pub pp_reduction: Option<f64>,
    pub pp_f1: Option<f64>,
    pub ho_reduction: Option<f64>,
    pub tos_gain: Option<f64>,
    pub train_s: Option<f64>,
    pub infer_s: Option<f64>,
    pub params: Option<usize>,
}

impl From<&MetricsSummary> for SummaryRow {
    fn from(s: &MetricsSummary) -> Self {
        Self {
            kind: s.kind.clone(),
            mode: s.mode.clone(),
            pp_reduction: s.reductions.pp_reduction_pct,
            pp_f1: s.detection.map(|d| d.f1),
            ho_reduction: Some(s.reductions.ho_reduction_pct),
            tos_gain: s.reductions.tos_gain_pct,
            train_s: Some(s.timing.train_s),
            infer_s: Some(s.timing.infer_total_s),
            params: Some(s.timing.param_count),
        }
    }
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, MetricsError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SUMMARY_HEADER => {}
        _ => return Err(MetricsError::Parse { line: 1, reason: format!("expected header `{SUMMARY_HEADER}`") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let err = |reason: String| MetricsError::Parse { line: i + 1, reason };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", cols.len())));
        }
        let f = |c: &str| -> Result<Option<f64>, MetricsError> {
            if c == "NA" {
                return Ok(None);
            }
            c.parse().map(Some).map_err(|_| err(format!("bad number `{c}`")))
        };
        rows.push(SummaryRow {
            kind: cols[0].to_string(),
            mode: cols[1].to_string(),
            pp_reduction: f(cols[2])?,
            pp_f1: f(cols[3])?,
            ho_reduction: f(cols[4])?,
            tos_gain: f(cols[5])?,
            train_s: f(cols[6])?,
            infer_s: f(cols[7])?,
            params: if cols[8] == "NA" {
                None
            } else {
                Some(cols[8].parse().map_err(|_| err(format!("bad count `{}`", cols[8])))?)
            },
        });
    }
    if rows.is_empty() {
        return Err(MetricsError::NoSummaries);
    }
    Ok(rows)
}

/// One SVG per metric, named after the metric.
pub fn chart_files(rows: &[SummaryRow]) -> Vec<(String, String)> {
    type Getter = fn(&SummaryRow) -> Option<f64>;
    let charts: [(&str, &str, Getter); 4] = [
        ("pp_reduction", "Ping-pong reduction (%)", |r| r.pp_reduction),
        ("pp_f1", "Ping-pong F1 (%)", |r| r.pp_f1),
        ("ho_reduction", "Handover reduction (%)", |r| r.ho_reduction),
        ("tos_gain", "ToS gain (%)", |r| r.tos_gain),
    ];
    charts
        .iter()
        .map(|(name, title, get)| {
            let bars: Vec<(String, Option<f64>)> = rows.iter().map(|r| (format!("{}/{}", r.kind, r.mode), get(r))).collect();
            (format!("{name}.svg"), bar_chart_svg(title, &bars))
        })
        .collect()
}

/// Plain-text table of parsed rows.
pub fn rows_txt(rows: &[SummaryRow], version: &str) -> String {
    let mut out = format!("hoseq {version}\n\n");
    let _ = writeln!(out, "{:<12} {:<5} {:>10} {:>8} {:>10} {:>9} {:>8}", "kind", "mode", "pp_red%", "pp_f1%", "ho_red%", "tos_gain%", "params");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:<5} {:>10} {:>8} {:>10} {:>9} {:>8}",
            r.kind,
            r.mode,
            opt(r.pp_reduction, 2),
            opt(r.pp_f1, 2),
            opt(r.ho_reduction, 2),
            opt(r.tos_gain, 2),
            r.params.map_or("NA".to_string(), |p| p.to_string())
        );
    }
    out
}

fn write_all(out_dir: &Path, files: Vec<(String, String)>) -> Result<Vec<PathBuf>, MetricsError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| MetricsError::Io { path: out_dir.display().to_string(), reason: e.to_string() })?;
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out_dir.join(name);
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `summary.csv`, `summary.txt`, `timings.csv` and one SVG chart per
/// metric into `out_dir` (created if absent). Returns the written paths.
pub fn emit_report(summaries: &[MetricsSummary], out_dir: &Path, version: &str, timings: bool) -> Result<Vec<PathBuf>, MetricsError> {
    if summaries.is_empty() {
        return Err(MetricsError::NoSummaries);
    }
    let mut files = vec![
        ("summary.csv".to_string(), summary_csv(summaries, timings)),
        ("summary.txt".to_string(), summary_txt(summaries, version)),
        ("timings.csv".to_string(), timings_csv(summaries)),
    ];
    let rows: Vec<SummaryRow> = summaries.iter().map(SummaryRow::from).collect();
    files.extend(chart_files(&rows));
    write_all(out_dir, files)
}

/// Re-renders `report.txt` and the charts from an existing `summary.csv`.
pub fn render_summary(summary_csv_text: &str, out_dir: &Path, version: &str) -> Result<Vec<PathBuf>, MetricsError> {
    let rows = parse_summary_csv(summary_csv_text)?;
    let mut files = vec![("report.txt".to_string(), rows_txt(&rows, version))];
    files.extend(chart_files(&rows));
    write_all(out_dir, files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a3::HandoverEvent;

    #[test]
    fn classification_examples() {
        let t = [true, false, false, false];
        let c = classification_metrics(&t, &t).unwrap();
        assert_eq!((c.accuracy, c.precision, c.recall, c.f1), (100.0, 100.0, 100.0, 100.0));

        let c = classification_metrics(&t, &[true, true, false, false]).unwrap();
        assert_eq!((c.precision, c.recall), (50.0, 100.0));
        assert!((c.f1 - 200.0 / 3.0).abs() < 1e-12);

        let c = classification_metrics(&[true, false], &[false, false]).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));

        assert!(matches!(classification_metrics(&t, &[true]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn ping_pong_reduction_arithmetic() {
        let r = pp_reduction_pct(54, 1).unwrap();
        assert!((r - 98.148_148_148_148_15).abs() < 1e-9);
        assert_eq!(format!("{r:.2}"), "98.15");
        assert_eq!(pp_reduction_pct(0, 0), None);
    }

    fn log(n: usize, executed: usize) -> HandoverLog {
        let events = (0..n)
            .map(|i| HandoverEvent {
                index: i,
                trigger_ts_ms: i as i64 * 1000,
                sample: i,
                source_cell_id: if i % 2 == 0 { 1 } else { 2 },
                target_cell_id: if i % 2 == 0 { 2 } else { 1 },
                tos_s: Some(1.0),
                pp_flag: false,
                executed: i < executed,
            })
            .collect();
        HandoverLog { initial_cell_id: 1, events, trace_duration_s: n as f64 }
    }

    #[test]
    fn reduction_examples() {
        let b = log(100, 100);
        let r = reduction_metrics(&b, &log(100, 80)).unwrap();
        assert!((r.ho_reduction_pct - 20.0).abs() < 1e-12);
        let same = reduction_metrics(&b, &b).unwrap();
        assert_eq!((same.pp_reduction_pct, same.ho_reduction_pct, same.tos_gain_pct), (None, 0.0, Some(0.0)));
        assert_eq!(reduction_metrics(&log(3, 0), &b), Err(MetricsError::NoBaselineHandovers));
    }

    #[test]
    fn timing_per_event() {
        let h = TrainHistory { wall_train_s: 2.0, param_count: 7, ..Default::default() };
        assert_eq!(timing_capture(&h, 1.0, 0).infer_per_event_s, None);
        let t = timing_capture(&h, 1.0, 4);
        assert_eq!(t.infer_per_event_s, Some(0.25));
        assert_eq!(t.param_count, 7);
    }

    #[test]
    fn chart_marks_missing_values() {
        let svg = bar_chart_svg("x", &[("a".into(), Some(-3.0)), ("b".into(), None)]);
        assert!(svg.starts_with("<svg") && svg.contains(">NA<") && svg.contains(">-3.00<"));
    }
}
