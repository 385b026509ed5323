//! Synthetic drive-test generator.
//!
//! Cells follow the log-distance path-loss law with spatially correlated
//! log-normal shadowing. The UE walks a waypoint trajectory at constant speed
//! and records the five strongest cells at every sample.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::trace::{
    CellMeasurement, DriveTrace, MeasurementRecord, Mobility, Operator, RadioField, Session, MAX_NEIGHBORS,
};

pub const DEFAULT_PL0_DB: f64 = 30.0;
pub const DEFAULT_D0_M: f64 = 1.0;
pub const DEFAULT_EXPONENT: f64 = 3.0;
pub const DEFAULT_TX_POWER_DBM: f64 = 30.0;
pub const DEFAULT_SHADOWING_SIGMA_DB: f64 = 4.0;
pub const DEFAULT_SHADOWING_CORR_M: f64 = 20.0;
pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -120.0;

/// Distances below this are floored to keep the log finite.
pub const MIN_DISTANCE_M: f64 = 1.0;

const METERS_PER_DEG_LAT: f64 = 111_320.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Grid,
    CorridorOscillation,
    StreetCanyon,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Grid => "grid",
            Preset::CorridorOscillation => "corridor",
            Preset::StreetCanyon => "canyon",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "grid" => Ok(Preset::Grid),
            "corridor" | "corridor_oscillation" => Ok(Preset::CorridorOscillation),
            "canyon" | "street_canyon" => Ok(Preset::StreetCanyon),
            other => Err(format!("unknown preset `{other}` (expected grid, corridor or canyon)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSite {
    pub cell_id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x_m: f64,
    pub y_m: f64,
    pub dwell_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self { pl0_db: DEFAULT_PL0_DB, d0_m: DEFAULT_D0_M, exponent: DEFAULT_EXPONENT }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(MIN_DISTANCE_M);
        self.pl0_db + 10.0 * self.exponent * (d / self.d0_m).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cells: Vec<CellSite>,
    pub trajectory: Vec<Waypoint>,
    pub ue_speed_mps: f64,
    pub sample_period_ms: i64,
    pub shadowing_sigma_db: f64,
    pub shadowing_corr_m: f64,
    pub pathloss: PathLoss,
    pub noise_floor_dbm: f64,
    pub operator: Operator,
    pub mobility: Mobility,
    /// Sessions cycle FTP -> VIDEO -> HTTP with this period.
    pub session_period_s: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::InvalidScenario(m));
        if self.cells.len() < 2 {
            return fail(format!("need at least 2 cells, got {}", self.cells.len()));
        }
        if self.trajectory.len() < 2 {
            return fail(format!("need at least 2 waypoints, got {}", self.trajectory.len()));
        }
        if self.sample_period_ms <= 0 {
            return fail("sample_period_ms must be positive".into());
        }
        if !(1.5..=6.0).contains(&self.pathloss.exponent) {
            return fail(format!("path-loss exponent {} outside [1.5, 6]", self.pathloss.exponent));
        }
        if !(self.ue_speed_mps > 0.0) {
            return fail("ue_speed_mps must be positive".into());
        }
        if !(self.shadowing_sigma_db >= 0.0) || !(self.shadowing_corr_m >= 0.0) {
            return fail("shadowing parameters must be non-negative".into());
        }
        if !(self.pathloss.d0_m > 0.0) {
            return fail("reference distance must be positive".into());
        }
        if self.trajectory.iter().any(|w| !(w.dwell_s >= 0.0)) {
            return fail("dwell times must be non-negative".into());
        }
        let mut ids: Vec<u32> = self.cells.iter().map(|c| c.cell_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.cells.len() {
            return fail("cell ids must be unique".into());
        }
        Ok(())
    }

    /// Mean RSRP of a cell at a position, without shadowing.
    pub fn mean_rsrp(&self, cell: &CellSite, x_m: f64, y_m: f64) -> f64 {
        let d = (cell.x_m - x_m).hypot(cell.y_m - y_m);
        cell.tx_power_dbm - self.pathloss.loss_db(d)
    }

    /// Stable FNV-1a digest of every numeric field, mixed into the RNG seed.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bits: u64| {
            for b in bits.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for c in &self.cells {
            eat(c.cell_id as u64);
            eat(c.x_m.to_bits());
            eat(c.y_m.to_bits());
            eat(c.tx_power_dbm.to_bits());
        }
        for w in &self.trajectory {
            eat(w.x_m.to_bits());
            eat(w.y_m.to_bits());
            eat(w.dwell_s.to_bits());
        }
        for v in [
            self.ue_speed_mps,
            self.shadowing_sigma_db,
            self.shadowing_corr_m,
            self.pathloss.pl0_db,
            self.pathloss.d0_m,
            self.pathloss.exponent,
            self.noise_floor_dbm,
            self.session_period_s,
        ] {
            eat(v.to_bits());
        }
        eat(self.sample_period_ms as u64);
        h
    }
}

fn cell(cell_id: u32, x_m: f64, y_m: f64) -> CellSite {
    CellSite { cell_id, x_m, y_m, tx_power_dbm: DEFAULT_TX_POWER_DBM }
}

fn base_scenario(cells: Vec<CellSite>, trajectory: Vec<Waypoint>) -> Scenario {
    Scenario {
        cells,
        trajectory,
        ue_speed_mps: 1.4,
        sample_period_ms: 200,
        shadowing_sigma_db: DEFAULT_SHADOWING_SIGMA_DB,
        shadowing_corr_m: DEFAULT_SHADOWING_CORR_M,
        pathloss: PathLoss::default(),
        noise_floor_dbm: DEFAULT_NOISE_FLOOR_DBM,
        operator: Operator::A,
        mobility: Mobility::Walk,
        session_period_s: 120.0,
    }
}

/// Half-distance between the two corridor cells.
pub const CORRIDOR_HALF_SPACING_M: f64 = 50.0;
const CORRIDOR_MAX_Y_M: f64 = 40.0;
const CORRIDOR_EPISODES: usize = 400;

/// Builds a preset scenario; the same `(preset, seed)` always yields the same
/// scenario.
pub fn generate_scenario(preset: Preset, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce0_0000_0000 ^ preset as u64);
    match preset {
        Preset::Grid => {
            let spacing = 300.0;
            let mut cells = Vec::new();
            for gy in 0..3 {
                for gx in 0..3 {
                    cells.push(cell(10 + gy * 3 + gx, gx as f64 * spacing, gy as f64 * spacing));
                }
            }
            let trajectory = (0..24)
                .map(|_| Waypoint {
                    x_m: rng.random_range(-50.0..650.0),
                    y_m: rng.random_range(-50.0..650.0),
                    dwell_s: if rng.random_bool(0.3) { rng.random_range(5.0..30.0) } else { 0.0 },
                })
                .collect();
            let mut s = base_scenario(cells, trajectory);
            s.mobility = Mobility::Walk;
            s.ue_speed_mps = 1.4;
            s.sample_period_ms = 500;
            s
        }
        Preset::CorridorOscillation => {
            // Two cells on the x axis with their boundary along x = 0. Episodes
            // alternate between perpendicular crossings that settle deep inside
            // one cell and runs along the boundary, where shadowing flips the
            // stronger cell back and forth.
            let half = CORRIDOR_HALF_SPACING_M;
            let cells = vec![cell(1, -half, 0.0), cell(2, half, 0.0)];
            let mut y: f64 = 0.0;
            let mut trajectory = vec![Waypoint { x_m: -0.75 * half, y_m: y, dwell_s: 20.0 }];
            let mut side = -1.0;
            for _ in 0..CORRIDOR_EPISODES {
                if rng.random_bool(0.6) {
                    side = -side;
                }
                trajectory.push(Waypoint {
                    x_m: side * rng.random_range(0.6 * half..0.9 * half),
                    y_m: y,
                    dwell_s: rng.random_range(5.0..20.0),
                });
                if rng.random_bool(0.5) {
                    trajectory.push(Waypoint { x_m: rng.random_range(-3.0..3.0), y_m: y, dwell_s: 0.0 });
                    for _ in 0..rng.random_range(6..13) {
                        let target = -y.signum() * rng.random_range(10.0..CORRIDOR_MAX_Y_M);
                        let steps = rng.random_range(2..5);
                        let start = y;
                        for k in 1..=steps {
                            y = start + (target - start) * k as f64 / steps as f64;
                            trajectory.push(Waypoint { x_m: rng.random_range(-3.0..3.0), y_m: y, dwell_s: 0.0 });
                        }
                    }
                }
            }
            let mut s = base_scenario(cells, trajectory);
            s.mobility = Mobility::Shuttle;
            s.pathloss.exponent = 4.0;
            s.shadowing_corr_m = 6.0;
            s.ue_speed_mps = 8.0;
            s.sample_period_ms = 200;
            s
        }
        Preset::StreetCanyon => {
            let mut cells: Vec<CellSite> =
                (0..6).map(|i| cell(20 + i, i as f64 * 250.0, if i % 2 == 0 { 15.0 } else { -15.0 })).collect();
            for c in &mut cells {
                c.tx_power_dbm = DEFAULT_TX_POWER_DBM + rng.random_range(-3.0..3.0);
            }
            let mut trajectory = Vec::new();
            for lap in 0..4 {
                let (from, to) = if lap % 2 == 0 { (-50.0, 1300.0) } else { (1300.0, -50.0) };
                trajectory.push(Waypoint { x_m: from, y_m: 0.0, dwell_s: rng.random_range(10.0..30.0) });
                trajectory.push(Waypoint { x_m: to, y_m: 0.0, dwell_s: 0.0 });
            }
            let mut s = base_scenario(cells, trajectory);
            s.pathloss.exponent = 3.5;
            s.mobility = Mobility::Brt;
            s.ue_speed_mps = 12.0;
            s.sample_period_ms = 200;
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePosition {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    /// Cumulative distance travelled.
    pub path_m: f64,
}

/// Samples the UE position along the trajectory every `sample_period_ms`.
pub fn ue_positions(scenario: &Scenario) -> Vec<UePosition> {
    // Piecewise timeline of (start time, duration, from, to); dwell segments
    // have from == to.
    struct Segment {
        t0: f64,
        dur: f64,
        from: (f64, f64),
        to: (f64, f64),
        path0: f64,
    }
    let mut segs = Vec::new();
    let mut t = 0.0;
    let mut path = 0.0;
    for (i, w) in scenario.trajectory.iter().enumerate() {
        let p = (w.x_m, w.y_m);
        if w.dwell_s > 0.0 {
            segs.push(Segment { t0: t, dur: w.dwell_s, from: p, to: p, path0: path });
            t += w.dwell_s;
        }
        if let Some(next) = scenario.trajectory.get(i + 1) {
            let q = (next.x_m, next.y_m);
            let len = (q.0 - p.0).hypot(q.1 - p.1);
            if len > 0.0 {
                let dur = len / scenario.ue_speed_mps;
                segs.push(Segment { t0: t, dur, from: p, to: q, path0: path });
                t += dur;
                path += len;
            }
        }
    }
    let total = t;
    let dt = scenario.sample_period_ms as f64 / 1000.0;
    let n = (total / dt).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg_idx = 0;
    for k in 0..n {
        let ts = k as f64 * dt;
        while seg_idx + 1 < segs.len() && ts >= segs[seg_idx].t0 + segs[seg_idx].dur {
            seg_idx += 1;
        }
        let (x, y, pm) = match segs.get(seg_idx) {
            Some(s) => {
                let frac = if s.dur > 0.0 { ((ts - s.t0) / s.dur).clamp(0.0, 1.0) } else { 1.0 };
                let seg_len = (s.to.0 - s.from.0).hypot(s.to.1 - s.from.1);
                (
                    s.from.0 + (s.to.0 - s.from.0) * frac,
                    s.from.1 + (s.to.1 - s.from.1) * frac,
                    s.path0 + seg_len * frac,
                )
            }
            None => (scenario.trajectory[0].x_m, scenario.trajectory[0].y_m, 0.0),
        };
        out.push(UePosition { t_s: ts, x_m: x, y_m: y, path_m: pm });
    }
    out
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Bearing in degrees clockwise from north (+y), in [0, 360).
pub fn bearing_deg(dx: f64, dy: f64) -> f64 {
    let b = dx.atan2(dy).to_degrees().rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Samples a trace. Radio values are clipped to the reporting ranges, as a
/// UE would report them.
pub fn sample_trace(scenario: &Scenario, seed: u64) -> Result<DriveTrace, SimError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ scenario.digest().rotate_left(17));
    let positions = ue_positions(scenario);
    let sigma = scenario.shadowing_sigma_db;
    let mut shadow: Vec<f64> = scenario
        .cells
        .iter()
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let noise_lin = db_to_lin(scenario.noise_floor_dbm);

    let mut records = Vec::with_capacity(positions.len());
    let mut last_bearing = 0.0;
    for (k, pos) in positions.iter().enumerate() {
        if k > 0 {
            let step = pos.path_m - positions[k - 1].path_m;
            let rho = if scenario.shadowing_corr_m > 0.0 {
                (-step / scenario.shadowing_corr_m).exp()
            } else {
                0.0
            };
            let innov = (1.0 - rho * rho).max(0.0).sqrt();
            for s in shadow.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *s = rho * *s + innov * sigma * z;
            }
        }
        let mut rsrp: Vec<(u32, f64)> = scenario
            .cells
            .iter()
            .zip(&shadow)
            .map(|(c, s)| (c.cell_id, scenario.mean_rsrp(c, pos.x_m, pos.y_m) - s))
            .collect();
        rsrp.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let total_lin: f64 = rsrp.iter().map(|(_, p)| db_to_lin(*p)).sum();
        let measure = |(id, p): (u32, f64)| {
            let interference = total_lin - db_to_lin(p) + noise_lin;
            let snr = p - lin_to_db(interference);
            let rsrq = -lin_to_db(12.0) - lin_to_db(1.0 + 1.0 / db_to_lin(snr));
            let clip = |f: RadioField, v: f64| v.clamp(f.range().0, f.range().1);
            CellMeasurement::new(id, clip(RadioField::Rsrp, p), clip(RadioField::Rsrq, rsrq), clip(RadioField::Snr, snr))
        };
        let mut measured = rsrp.into_iter().take(MAX_NEIGHBORS + 1).map(measure);
        let serving = measured.next().expect("scenario has cells");
        let neighbors: Vec<CellMeasurement> = measured.collect();

        let (speed, bearing) = if k == 0 {
            let next = positions.get(1).copied().unwrap_or(*pos);
            (0.0, bearing_or(next.x_m - pos.x_m, next.y_m - pos.y_m, 0.0))
        } else {
            let prev = positions[k - 1];
            let (dx, dy) = (pos.x_m - prev.x_m, pos.y_m - prev.y_m);
            let dt = pos.t_s - prev.t_s;
            (dx.hypot(dy) / dt, bearing_or(dx, dy, last_bearing))
        };
        last_bearing = bearing;
        let session_slot = (pos.t_s / scenario.session_period_s).floor() as usize % Session::ALL.len();
        let lat = pos.y_m / METERS_PER_DEG_LAT;
        let lon = pos.x_m / METERS_PER_DEG_LAT;
        records.push(MeasurementRecord {
            ts_ms: k as i64 * scenario.sample_period_ms,
            operator: scenario.operator,
            lat_deg: lat,
            lon_deg: lon,
            speed_mps: speed,
            bearing_deg: bearing,
            session: Session::ALL[session_slot],
            mobility: scenario.mobility,
            serving,
            neighbors,
        });
    }
    Ok(DriveTrace { records, sample_period_ms: scenario.sample_period_ms })
}

fn bearing_or(dx: f64, dy: f64, fallback: f64) -> f64 {
    if dx.hypot(dy) < 1e-9 {
        fallback
    } else {
        bearing_deg(dx, dy)
    }
}
