//! Drive-test trace types, CSV ingestion and repair.
//!
//! A trace is an ordered list of [`MeasurementRecord`]s, each carrying the
//! serving cell and up to four neighbours. Radio values may be missing right
//! after parsing; [`interpolate_missing`] fills them so the rest of the
//! pipeline can assume complete numbers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Maximum number of neighbour cells kept per record.
pub const MAX_NEIGHBORS: usize = 4;

pub const RSRP_RANGE: (f64, f64) = (-140.0, -44.0);
pub const RSRQ_RANGE: (f64, f64) = (-19.5, -3.0);
pub const SNR_RANGE: (f64, f64) = (-20.0, 30.0);

/// Nominal spacing used when a trace has a single record.
const DEFAULT_SAMPLE_PERIOD_MS: i64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("malformed header: missing column `{0}`")]
    MalformedHeader(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("trace has no data rows")]
    EmptyTrace,
    #[error("channel `{0}` has no observed value")]
    AllMissingChannel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Session {
    Ftp,
    Video,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mobility {
    Walk,
    Shuttle,
    Brt,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $text),+
                }
            }

            /// Position of the variant, used for one-hot encoding.
            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                $(if s.eq_ignore_ascii_case($text) {
                    return Ok($ty::$variant);
                })+
                Err(format!("unknown {} `{}`", stringify!($ty).to_lowercase(), s))
            }
        }
    };
}

text_enum!(Operator { A => "A", B => "B", C => "C" });
text_enum!(Session { Ftp => "FTP", Video => "VIDEO", Http => "HTTP" });
text_enum!(Mobility { Walk => "WALK", Shuttle => "SHUTTLE", Brt => "BRT" });

#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasurement {
    pub cell_id: u32,
    pub rsrp_dbm: Option<f64>,
    pub rsrq_db: Option<f64>,
    pub snr_db: Option<f64>,
}

impl CellMeasurement {
    pub fn new(cell_id: u32, rsrp_dbm: f64, rsrq_db: f64, snr_db: f64) -> Self {
        Self {
            cell_id,
            rsrp_dbm: Some(rsrp_dbm),
            rsrq_db: Some(rsrq_db),
            snr_db: Some(snr_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub ts_ms: i64,
    pub operator: Operator,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub speed_mps: f64,
    pub bearing_deg: f64,
    pub session: Session,
    pub mobility: Mobility,
    pub serving: CellMeasurement,
    pub neighbors: Vec<CellMeasurement>,
}

impl MeasurementRecord {
    /// Serving cell followed by neighbours.
    pub fn cells(&self) -> impl Iterator<Item = &CellMeasurement> {
        std::iter::once(&self.serving).chain(self.neighbors.iter())
    }

    pub fn cell(&self, cell_id: u32) -> Option<&CellMeasurement> {
        self.cells().find(|c| c.cell_id == cell_id)
    }

    /// RSRP of `cell_id` if it was measured at this sample.
    pub fn rsrp_of(&self, cell_id: u32) -> Option<f64> {
        self.cell(cell_id).and_then(|c| c.rsrp_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveTrace {
    pub records: Vec<MeasurementRecord>,
    pub sample_period_ms: i64,
}

impl DriveTrace {
    /// Builds a trace and checks the container invariants.
    pub fn new(records: Vec<MeasurementRecord>, sample_period_ms: i64) -> Result<Self, TraceError> {
        if records.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        check_records(&records)?;
        if sample_period_ms <= 0 {
            return Err(TraceError::MalformedRow {
                row: 0,
                reason: format!("sample period must be positive, got {sample_period_ms}"),
            });
        }
        Ok(Self { records, sample_period_ms })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.ts_ms - a.ts_ms) as f64 / 1000.0,
            _ => 0.0,
        }
    }

    /// Index of the record with exactly this timestamp.
    pub fn index_of_ts(&self, ts_ms: i64) -> Option<usize> {
        self.records.binary_search_by_key(&ts_ms, |r| r.ts_ms).ok()
    }

    pub fn count_missing(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.cells())
            .map(|c| {
                [c.rsrp_dbm, c.rsrq_db, c.snr_db]
                    .iter()
                    .filter(|v| v.is_none())
                    .count()
            })
            .sum()
    }
}

fn check_records(records: &[MeasurementRecord]) -> Result<(), TraceError> {
    let operator = records[0].operator;
    for (row, pair) in records.windows(2).enumerate() {
        if pair[1].ts_ms <= pair[0].ts_ms {
            return Err(TraceError::MalformedRow {
                row: row + 1,
                reason: format!(
                    "timestamp {} not after previous {}",
                    pair[1].ts_ms, pair[0].ts_ms
                ),
            });
        }
    }
    for (row, r) in records.iter().enumerate() {
        if r.operator != operator {
            return Err(TraceError::MalformedRow {
                row,
                reason: format!("operator {} differs from trace operator {}", r.operator, operator),
            });
        }
        if !(0.0..360.0).contains(&r.bearing_deg) {
            return Err(TraceError::MalformedRow {
                row,
                reason: format!("bearing_deg {} outside [0, 360)", r.bearing_deg),
            });
        }
        if !(r.speed_mps >= 0.0) {
            return Err(TraceError::MalformedRow {
                row,
                reason: format!("speed_mps {} is negative", r.speed_mps),
            });
        }
        if r.neighbors.len() > MAX_NEIGHBORS {
            return Err(TraceError::MalformedRow {
                row,
                reason: format!("{} neighbours, at most {MAX_NEIGHBORS} allowed", r.neighbors.len()),
            });
        }
    }
    Ok(())
}

/// Median positive timestamp gap, the nominal sample period.
fn infer_sample_period(records: &[MeasurementRecord]) -> i64 {
    let mut gaps: Vec<i64> = records.windows(2).map(|w| w[1].ts_ms - w[0].ts_ms).collect();
    if gaps.is_empty() {
        return DEFAULT_SAMPLE_PERIOD_MS;
    }
    gaps.sort_unstable();
    gaps[gaps.len() / 2].max(1)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const BASE_COLUMNS: [&str; 12] = [
    "ts_ms",
    "operator",
    "lat_deg",
    "lon_deg",
    "speed_mps",
    "bearing_deg",
    "session",
    "mobility",
    "serving_id",
    "serving_rsrp",
    "serving_rsrq",
    "serving_snr",
];

/// The canonical header, including all four neighbour blocks.
pub fn canonical_header() -> Vec<String> {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for k in 1..=MAX_NEIGHBORS {
        for field in ["id", "rsrp", "rsrq", "snr"] {
            cols.push(format!("n{k}_{field}"));
        }
    }
    cols
}

/// Maps canonical column names onto the headers found in an external file.
///
/// Columns without an explicit entry are looked up under their canonical name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnMapping {
    renames: HashMap<String, String>,
}

impl ColumnMapping {
    pub fn canonical() -> Self {
        Self::default()
    }

    pub fn with(mut self, canonical: &str, external: &str) -> Self {
        self.renames.insert(canonical.to_string(), external.to_string());
        self
    }

    /// Parses `canonical = external` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut mapping = Self::default();
        let known = canonical_header();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (canon, ext) = line.split_once('=').ok_or_else(|| TraceError::MalformedRow {
                row: lineno,
                reason: format!("mapping line `{line}` is not `canonical = external`"),
            })?;
            let canon = canon.trim();
            if !known.iter().any(|k| k == canon) {
                return Err(TraceError::MalformedHeader(canon.to_string()));
            }
            mapping = mapping.with(canon, ext.trim());
        }
        Ok(mapping)
    }

    fn external<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames.get(canonical).map(String::as_str).unwrap_or(canonical)
    }
}

fn split_line(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r').split(',').map(str::trim).collect()
}

struct Columns {
    base: [usize; 12],
    neighbors: Vec<[usize; 4]>,
}

fn resolve_columns(header: &[&str], mapping: &ColumnMapping) -> Result<Columns, TraceError> {
    let find = |canon: &str| header.iter().position(|h| *h == mapping.external(canon));
    let mut base = [0usize; 12];
    for (slot, canon) in base.iter_mut().zip(BASE_COLUMNS) {
        *slot = find(canon).ok_or_else(|| TraceError::MalformedHeader(canon.to_string()))?;
    }
    let mut neighbors = Vec::new();
    for k in 1..=MAX_NEIGHBORS {
        let names = ["id", "rsrp", "rsrq", "snr"].map(|f| format!("n{k}_{f}"));
        let found: Vec<Option<usize>> = names.iter().map(|n| find(n)).collect();
        match found.iter().filter(|f| f.is_some()).count() {
            0 => break,
            4 => neighbors.push([found[0].unwrap(), found[1].unwrap(), found[2].unwrap(), found[3].unwrap()]),
            _ => {
                let missing = names
                    .iter()
                    .zip(&found)
                    .find(|(_, f)| f.is_none())
                    .map(|(n, _)| n.clone())
                    .unwrap();
                return Err(TraceError::MalformedHeader(missing));
            }
        }
    }
    let extra = header
        .iter()
        .filter(|h| {
            h.strip_prefix('n')
                .and_then(|rest| rest.split('_').next())
                .and_then(|k| k.parse::<usize>().ok())
                .is_some_and(|k| k > MAX_NEIGHBORS)
        })
        .count();
    if extra > 0 {
        log::warn!("ignoring {extra} neighbour columns beyond the first {MAX_NEIGHBORS} neighbours");
    }
    Ok(Columns { base, neighbors })
}

fn field<'a>(fields: &[&'a str], idx: usize, row: usize) -> Result<&'a str, TraceError> {
    fields.get(idx).copied().ok_or_else(|| TraceError::MalformedRow {
        row,
        reason: format!("expected at least {} fields, found {}", idx + 1, fields.len()),
    })
}

fn parse_num<T: FromStr>(text: &str, name: &str, row: usize) -> Result<T, TraceError> {
    text.parse().map_err(|_| TraceError::MalformedRow {
        row,
        reason: format!("`{name}` value `{text}` is not numeric"),
    })
}

fn parse_opt(text: &str, name: &str, row: usize) -> Result<Option<f64>, TraceError> {
    if text.is_empty() {
        return Ok(None);
    }
    let v: f64 = parse_num(text, name, row)?;
    if !v.is_finite() {
        return Err(TraceError::MalformedRow { row, reason: format!("`{name}` is not finite") });
    }
    Ok(Some(v))
}

fn parse_enum<T: FromStr<Err = String>>(text: &str, row: usize) -> Result<T, TraceError> {
    text.parse().map_err(|reason| TraceError::MalformedRow { row, reason })
}

/// Parses a CSV drive-test export. Row indices in errors are zero-based data
/// rows (the header is not counted).
pub fn parse_trace(csv_text: &str, mapping: &ColumnMapping) -> Result<DriveTrace, TraceError> {
    let mut lines = csv_text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines.next().ok_or(TraceError::EmptyTrace)?;
    let header = split_line(header_line);
    let cols = resolve_columns(&header, mapping)?;

    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        let f = split_line(line);
        let b = &cols.base;
        let num = |i: usize, name: &str| -> Result<f64, TraceError> {
            let v: f64 = parse_num(field(&f, b[i], row)?, name, row)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(TraceError::MalformedRow { row, reason: format!("`{name}` is not finite") })
            }
        };
        let ts_ms: i64 = parse_num(field(&f, b[0], row)?, "ts_ms", row)?;
        let operator = parse_enum(field(&f, b[1], row)?, row)?;
        let lat_deg = num(2, "lat_deg")?;
        let lon_deg = num(3, "lon_deg")?;
        let speed_mps = num(4, "speed_mps")?;
        let bearing_deg = num(5, "bearing_deg")?;
        let session = parse_enum(field(&f, b[6], row)?, row)?;
        let mobility = parse_enum(field(&f, b[7], row)?, row)?;
        let serving = CellMeasurement {
            cell_id: parse_num(field(&f, b[8], row)?, "serving_id", row)?,
            rsrp_dbm: parse_opt(field(&f, b[9], row)?, "serving_rsrp", row)?,
            rsrq_db: parse_opt(field(&f, b[10], row)?, "serving_rsrq", row)?,
            snr_db: parse_opt(field(&f, b[11], row)?, "serving_snr", row)?,
        };
        let mut neighbors = Vec::new();
        for (k, idx) in cols.neighbors.iter().enumerate() {
            let id_text = field(&f, idx[0], row)?;
            if id_text.is_empty() {
                continue;
            }
            let n = k + 1;
            neighbors.push(CellMeasurement {
                cell_id: parse_num(id_text, &format!("n{n}_id"), row)?,
                rsrp_dbm: parse_opt(field(&f, idx[1], row)?, &format!("n{n}_rsrp"), row)?,
                rsrq_db: parse_opt(field(&f, idx[2], row)?, &format!("n{n}_rsrq"), row)?,
                snr_db: parse_opt(field(&f, idx[3], row)?, &format!("n{n}_snr"), row)?,
            });
        }
        records.push(MeasurementRecord {
            ts_ms,
            operator,
            lat_deg,
            lon_deg,
            speed_mps,
            bearing_deg,
            session,
            mobility,
            serving,
            neighbors,
        });
    }
    if records.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    check_records(&records)?;
    let period = infer_sample_period(&records);
    Ok(DriveTrace { records, sample_period_ms: period })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the canonical CSV. Floats use the shortest round-trip form, so
/// parsing the output reproduces the trace exactly.
pub fn write_trace(trace: &DriveTrace) -> String {
    let mut out = canonical_header().join(",");
    out.push('\n');
    for r in &trace.records {
        let mut fields = vec![
            r.ts_ms.to_string(),
            r.operator.to_string(),
            r.lat_deg.to_string(),
            r.lon_deg.to_string(),
            r.speed_mps.to_string(),
            r.bearing_deg.to_string(),
            r.session.to_string(),
            r.mobility.to_string(),
        ];
        for k in 0..=MAX_NEIGHBORS {
            let cell = if k == 0 { Some(&r.serving) } else { r.neighbors.get(k - 1) };
            match cell {
                Some(c) => {
                    fields.push(c.cell_id.to_string());
                    fields.push(fmt_opt(c.rsrp_dbm));
                    fields.push(fmt_opt(c.rsrq_db));
                    fields.push(fmt_opt(c.snr_db));
                }
                None => fields.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Validation and repair
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RadioField {
    Rsrp,
    Rsrq,
    Snr,
}

impl RadioField {
    pub const ALL: [RadioField; 3] = [RadioField::Rsrp, RadioField::Rsrq, RadioField::Snr];

    pub fn range(self) -> (f64, f64) {
        match self {
            RadioField::Rsrp => RSRP_RANGE,
            RadioField::Rsrq => RSRQ_RANGE,
            RadioField::Snr => SNR_RANGE,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            RadioField::Rsrp => "rsrp",
            RadioField::Rsrq => "rsrq",
            RadioField::Snr => "snr",
        }
    }

    fn get(self, c: &CellMeasurement) -> Option<f64> {
        match self {
            RadioField::Rsrp => c.rsrp_dbm,
            RadioField::Rsrq => c.rsrq_db,
            RadioField::Snr => c.snr_db,
        }
    }

    fn get_mut(self, c: &mut CellMeasurement) -> &mut Option<f64> {
        match self {
            RadioField::Rsrp => &mut c.rsrp_dbm,
            RadioField::Rsrq => &mut c.rsrq_db,
            RadioField::Snr => &mut c.snr_db,
        }
    }
}

/// Column name of a value: slot 0 is the serving cell, slot k the k-th neighbour.
fn column_name(slot: usize, field: RadioField) -> String {
    if slot == 0 {
        format!("serving_{}", field.suffix())
    } else {
        format!("n{slot}_{}", field.suffix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub field: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn counts_by_field(&self) -> std::collections::BTreeMap<String, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for v in &self.violations {
            *counts.entry(v.field.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,field,value,lo,hi\n");
        for v in &self.violations {
            out.push_str(&format!("{},{},{},{},{}\n", v.row, v.field, v.value, v.lo, v.hi));
        }
        out
    }
}

/// Lists every present radio value outside its 3GPP reporting range.
pub fn validate_ranges(trace: &DriveTrace) -> ValidationReport {
    let mut violations = Vec::new();
    for (row, r) in trace.records.iter().enumerate() {
        for (slot, cell) in r.cells().enumerate() {
            for field in RadioField::ALL {
                let (lo, hi) = field.range();
                if let Some(value) = field.get(cell) {
                    if value < lo || value > hi {
                        violations.push(Violation { row, field: column_name(slot, field), value, lo, hi });
                    }
                }
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairPolicy {
    /// Clamp out-of-range values onto the nearest range bound.
    Clamp,
    /// Drop every row that has at least one violation.
    DropRows,
}

pub fn repair_ranges(trace: &DriveTrace, policy: RepairPolicy) -> Result<DriveTrace, TraceError> {
    match policy {
        RepairPolicy::Clamp => {
            let mut out = trace.clone();
            for r in &mut out.records {
                for cell in std::iter::once(&mut r.serving).chain(r.neighbors.iter_mut()) {
                    for field in RadioField::ALL {
                        let (lo, hi) = field.range();
                        if let Some(v) = field.get_mut(cell) {
                            *v = v.clamp(lo, hi);
                        }
                    }
                }
            }
            Ok(out)
        }
        RepairPolicy::DropRows => {
            let report = validate_ranges(trace);
            let bad: std::collections::HashSet<usize> = report.violations.iter().map(|v| v.row).collect();
            let records: Vec<_> = trace
                .records
                .iter()
                .enumerate()
                .filter(|(i, _)| !bad.contains(i))
                .map(|(_, r)| r.clone())
                .collect();
            DriveTrace::new(records, trace.sample_period_ms)
        }
    }
}

// ---------------------------------------------------------------------------
// Missing values
// ---------------------------------------------------------------------------

/// Fills missing radio values per column (serving and neighbour slots).
///
/// Interior gaps are interpolated linearly against `ts_ms`; leading and
/// trailing gaps take the nearest observed value. A column only exists at rows
/// where its cell is present.
pub fn interpolate_missing(trace: &DriveTrace) -> Result<DriveTrace, TraceError> {
    let mut out = trace.clone();
    for slot in 0..=MAX_NEIGHBORS {
        for field in RadioField::ALL {
            // rows where this slot exists, with its value
            let rows: Vec<(usize, i64, Option<f64>)> = out
                .records
                .iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let cell = if slot == 0 { Some(&r.serving) } else { r.neighbors.get(slot - 1) };
                    cell.map(|c| (i, r.ts_ms, field.get(c)))
                })
                .collect();
            if rows.is_empty() || rows.iter().all(|(_, _, v)| v.is_some()) {
                continue;
            }
            let observed: Vec<(i64, f64)> = rows.iter().filter_map(|(_, t, v)| v.map(|v| (*t, v))).collect();
            if observed.is_empty() {
                return Err(TraceError::AllMissingChannel(column_name(slot, field)));
            }
            for &(i, t, v) in &rows {
                if v.is_some() {
                    continue;
                }
                let filled = fill_at(&observed, t);
                let r = &mut out.records[i];
                let cell = if slot == 0 { &mut r.serving } else { &mut r.neighbors[slot - 1] };
                *field.get_mut(cell) = Some(filled);
            }
        }
    }
    Ok(out)
}

fn fill_at(observed: &[(i64, f64)], t: i64) -> f64 {
    let pos = observed.partition_point(|(ot, _)| *ot < t);
    if pos == 0 {
        return observed[0].1;
    }
    if pos == observed.len() {
        return observed[pos - 1].1;
    }
    let (t0, v0) = observed[pos - 1];
    let (t1, v1) = observed[pos];
    let frac = (t - t0) as f64 / (t1 - t0) as f64;
    v0 + (v1 - v0) * frac
}

/// One-hot session (3) followed by one-hot mobility (3).
pub fn encode_categoricals(trace: &DriveTrace) -> Vec<[f64; 6]> {
    trace.records.iter().map(one_hot).collect()
}

pub fn one_hot(r: &MeasurementRecord) -> [f64; 6] {
    let mut v = [0.0; 6];
    v[r.session.index()] = 1.0;
    v[3 + r.mobility.index()] = 1.0;
    v
}
