//! Subcommand implementations.
//!
//! Every command validates its configuration before touching the output
//! location, and removes whatever it wrote if a later step fails.

use std::fs;
use std::path::{Path, PathBuf};

use crate::a3::baseline_log;
use crate::config::{ConfigError, RunConfig};
use crate::control::decision_log_csv;
use crate::features::{apply_minmax, build_windows, chronological_split, fit_minmax, FeatureMode};
use crate::metrics::{emit_report, render_summary, MetricsSummary};
use crate::models::{grid_search, ModelKind, TrainConfig};
use crate::pipeline::{prepare_trace, run_all};
use crate::sim::{generate_scenario, sample_trace, Preset};
use crate::trace::{parse_trace, write_trace, ColumnMapping, DriveTrace, RepairPolicy, ValidationReport};
use crate::{Error, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(Error),
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => CommandError::Config(c),
            other => CommandError::Run(other),
        }
    }
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) | CommandError::Config(_) => EXIT_CONFIG,
            CommandError::Run(_) => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path, e: impl ToString) -> CommandError {
    CommandError::Run(Error::Io { path: path.display().to_string(), reason: e.to_string() })
}

/// Flags shared by the subcommands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker bound; `None` uses the available cores.
    pub jobs: Option<usize>,
    pub clamp: bool,
    pub oracle_weights: bool,
    pub models: Option<Vec<ModelKind>>,
    pub modes: Option<Vec<FeatureMode>>,
}

impl Options {
    /// Config file (or defaults) with the flags applied, validated.
    pub fn load_config(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if self.clamp {
            cfg.repair = RepairPolicy::Clamp;
        }
        if self.oracle_weights {
            cfg.oracle_weights = true;
        }
        if let Some(m) = &self.models {
            cfg.kinds = m.clone();
        }
        if let Some(m) = &self.modes {
            cfg.modes = m.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

/// Files written so far; `discard` deletes them (and the directory, if this
/// run created it).
struct Outputs {
    files: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new(), created_dirs: Vec::new() }
    }

    fn dir(&mut self, dir: &Path) -> Result<(), CommandError> {
        if !dir.exists() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            self.created_dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CommandError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            self.dir(parent)?;
        }
        self.files.push(path.to_path_buf());
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }

    fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir_all(d);
        }
    }
}

/// Runs `body` and rolls back its outputs on error.
fn transactional<T>(body: impl FnOnce(&mut Outputs) -> Result<T, CommandError>) -> Result<T, CommandError> {
    let mut out = Outputs::new();
    match body(&mut out) {
        Ok(v) => Ok(v),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn read_trace(path: &Path, mapping: &ColumnMapping) -> Result<DriveTrace, CommandError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_trace(&text, mapping).map_err(Error::from)?)
}

fn load_prepared(path: &Path, cfg: &RunConfig) -> Result<(DriveTrace, ValidationReport), CommandError> {
    let raw = read_trace(path, &ColumnMapping::canonical())?;
    Ok(prepare_trace(&raw, cfg.repair)?)
}

/// `gen <preset> <seed> <out.csv>`: synthetic trace in the canonical format.
pub fn cmd_gen(preset: &str, seed: u64, out: &Path) -> Result<(), CommandError> {
    let preset: Preset = preset.parse().map_err(CommandError::Usage)?;
    let trace = sample_trace(&generate_scenario(preset, seed), seed).map_err(Error::from)?;
    transactional(|o| o.write(out, write_trace(&trace)))
}

/// `ingest <in.csv> <out.csv>`: parses an external trace (optionally through
/// a column mapping file), repairs ranges and missing values, writes the
/// canonical trace and a `<out>.violations.csv` report.
pub fn cmd_ingest(opts: &Options, input: &Path, mapping: Option<&Path>, out: &Path) -> Result<ValidationReport, CommandError> {
    let cfg = opts.load_config()?;
    let mapping = match mapping {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", p.display())))?;
            ColumnMapping::parse(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?
        }
        None => ColumnMapping::canonical(),
    };
    let raw = read_trace(input, &mapping)?;
    let (clean, report) = prepare_trace(&raw, cfg.repair)?;
    transactional(|o| {
        o.write(out, write_trace(&clean))?;
        o.write(&out.with_extension("violations.csv"), report.to_csv())
    })?;
    Ok(report)
}

/// `label <trace.csv> <out.csv>`: baseline A3 log with ToS and ping-pong labels.
pub fn cmd_label(opts: &Options, input: &Path, out: &Path) -> Result<(), CommandError> {
    let cfg = opts.load_config()?;
    let (trace, _) = load_prepared(input, &cfg)?;
    let log = baseline_log(&trace, &cfg.a3).map_err(Error::from)?;
    transactional(|o| o.write(out, log.to_csv()))
}

/// `pipeline <trace.csv> <out_dir>`: every configured (kind, mode) pair from
/// labelling to report. Returns the summaries in configuration order.
pub fn cmd_pipeline(opts: &Options, input: &Path, out_dir: &Path) -> Result<Vec<MetricsSummary>, CommandError> {
    let cfg = opts.load_config()?;
    let seed = cfg.resolve_seed(opts.seed)?;
    let (trace, report) = load_prepared(input, &cfg)?;
    let baseline = baseline_log(&trace, &cfg.a3).map_err(Error::from)?;
    let experiments = run_all(&trace, &cfg, seed, opts.jobs())?;

    transactional(|o| {
        o.dir(out_dir)?;
        let effective = RunConfig { seed: Some(seed), ..cfg.clone() };
        o.write(&out_dir.join("config.cfg"), effective.to_text())?;
        o.write(&out_dir.join("violations.csv"), report.to_csv())?;
        o.write(&out_dir.join("baseline_log.csv"), baseline.to_csv())?;
        for e in &experiments {
            let cell = out_dir.join(format!("{}_{}", e.kind, e.mode));
            o.write(&cell.join("history.csv"), e.history.to_csv())?;
            o.write(&cell.join("params.bin"), e.params.to_bytes())?;
            o.write(&cell.join("holdout_baseline.csv"), e.holdout_baseline.to_csv())?;
            o.write(&cell.join("replay_log.csv"), e.replay.log.to_csv())?;
            o.write(&cell.join("decisions.csv"), decision_log_csv(&e.replay.decisions))?;
        }
        let summaries: Vec<MetricsSummary> = experiments.iter().map(|e| e.summary.clone()).collect();
        // emit_report writes its own files; track them for rollback
        let names = ["summary.csv", "summary.txt", "timings.csv"];
        o.files.extend(names.iter().map(|n| out_dir.join(n)));
        let written = emit_report(&summaries, out_dir, VERSION, cfg.report_timings).map_err(Error::from)?;
        o.files.extend(written);
        Ok(summaries)
    })
}

/// `gridsearch <trace.csv> <out_dir>`: sweeps the configured grid on the
/// first configured feature mode, writes `sweep.csv` and `best.cfg`.
pub fn cmd_gridsearch(opts: &Options, input: &Path, out_dir: &Path) -> Result<RunConfig, CommandError> {
    let cfg = opts.load_config()?;
    let seed = cfg.resolve_seed(opts.seed)?;
    let (trace, _) = load_prepared(input, &cfg)?;
    let baseline = baseline_log(&trace, &cfg.a3).map_err(Error::from)?;
    let mode = cfg.modes[0];
    let data = |seq_len: usize| {
        let set = build_windows(&trace, &baseline, mode, seq_len);
        let (tr, va, _) = chronological_split(&set.windows, cfg.split).map_err(|e| e.to_string())?;
        let spec = fit_minmax(&tr, mode).map_err(|e| e.to_string())?;
        Ok((apply_minmax(&spec, &tr).map_err(|e| e.to_string())?, apply_minmax(&spec, &va).map_err(|e| e.to_string())?))
    };
    let base = TrainConfig { seed, ..cfg.train.clone() };
    let result = grid_search(&cfg.kinds, &cfg.grid, &base, data, opts.jobs()).map_err(Error::from)?;

    let best = result.best_row().map(|row| {
        let mut b = RunConfig { seed: Some(seed), kinds: vec![row.kind], modes: vec![mode], seq_len: row.seq_len, ..cfg.clone() };
        b.train.hidden_dim = row.hidden_dim;
        b.train.learning_rate = row.learning_rate;
        b
    });
    transactional(|o| {
        o.dir(out_dir)?;
        o.write(&out_dir.join("sweep.csv"), result.to_csv())?;
        match (&best, &result.best_params) {
            (Some(b), Some(p)) => {
                o.write(&out_dir.join("best.cfg"), b.to_text())?;
                o.write(&out_dir.join("best_params.bin"), p.to_bytes())?;
                Ok(())
            }
            _ => Err(CommandError::Run(Error::Model(crate::models::ModelError::InvalidConfig(
                "every grid cell failed".into(),
            )))),
        }
    })?;
    Ok(best.expect("checked above"))
}

/// `report <summary.csv> <out_dir>`: re-renders the text table and charts.
pub fn cmd_report(summary: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CommandError> {
    let text = fs::read_to_string(summary).map_err(|e| io_err(summary, e))?;
    Ok(render_summary(&text, out_dir, VERSION).map_err(Error::from)?)
}
