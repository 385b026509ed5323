//! Flat `key = value` run configuration.

use std::fmt::Write as _;

use thiserror::Error;

use crate::a3::A3Params;
use crate::control::ControlThresholds;
use crate::features::{FeatureMode, DEFAULT_SEQ_LEN, DEFAULT_SPLIT};
use crate::models::{GridSpace, ModelKind, TrainConfig};
use crate::trace::RepairPolicy;

pub const SEED_ENV: &str = "HOSEQ_SEED";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a3: A3Params,
    pub thresholds: ControlThresholds,
    pub modes: Vec<FeatureMode>,
    pub seq_len: usize,
    pub kinds: Vec<ModelKind>,
    /// `seed` inside is replaced by the resolved run seed.
    pub train: TrainConfig,
    pub split: [f64; 3],
    /// `None` falls back to the environment, then to [`DEFAULT_SEED`].
    pub seed: Option<u64>,
    pub use_pp_head: bool,
    pub oracle_weights: bool,
    pub report_timings: bool,
    pub repair: RepairPolicy,
    pub grid: GridSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a3: A3Params::default(),
            thresholds: ControlThresholds::default(),
            modes: vec![FeatureMode::All],
            seq_len: DEFAULT_SEQ_LEN,
            kinds: vec![ModelKind::Gru],
            train: TrainConfig::default(),
            split: DEFAULT_SPLIT,
            seed: None,
            use_pp_head: false,
            oracle_weights: false,
            report_timings: false,
            repair: RepairPolicy::DropRows,
            grid: GridSpace::default(),
        }
    }
}

fn list<T, E: std::fmt::Display>(v: &str, f: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, String> = v.split(',').map(|s| f(s.trim()).map_err(|e| e.to_string())).collect();
    let items = items?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn parse_modes(v: &str) -> Result<Vec<FeatureMode>, String> {
    if v.trim().eq_ignore_ascii_case("both") {
        return Ok(vec![FeatureMode::RsrpOnly, FeatureMode::All]);
    }
    list(v, |s| s.parse::<FeatureMode>())
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey { line, key: key.trim().into() },
                SetError::Bad(reason) => ConfigError::BadValue {
                    line,
                    key: key.trim().into(),
                    value: value.trim().into(),
                    reason,
                },
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), SetError> {
        let bad = SetError::Bad;
        match key {
            "a3.hysteresis_db" => self.a3.hysteresis_db = num(v).map_err(bad)?,
            "a3.ttt_ms" => self.a3.ttt_ms = num(v).map_err(bad)?,
            "a3.t_pp_s" => self.a3.t_pp_s = num(v).map_err(bad)?,
            "ctrl.tos_th_s" => self.thresholds.tos_th_s = num(v).map_err(bad)?,
            "ctrl.rsrp_slope_th" => self.thresholds.rsrp_slope_th_db_s = num(v).map_err(bad)?,
            "ctrl.snr_slope_th" => self.thresholds.snr_slope_th_db_s = num(v).map_err(bad)?,
            "ctrl.osc_th_s" => self.thresholds.osc_th_s = num(v).map_err(bad)?,
            "ctrl.theta_rsrp_dbm" => self.thresholds.theta_rsrp_dbm = num(v).map_err(bad)?,
            "ctrl.theta_tos_s" => self.thresholds.theta_tos_s = num(v).map_err(bad)?,
            "ctrl.use_pp_head" => self.use_pp_head = parse_bool(v).map_err(bad)?,
            "ctrl.oracle_weights" => self.oracle_weights = parse_bool(v).map_err(bad)?,
            "feat.mode" => self.modes = parse_modes(v).map_err(bad)?,
            "feat.seq_len" => self.seq_len = num(v).map_err(bad)?,
            "model.kind" => self.kinds = list(v, |s| s.parse::<ModelKind>()).map_err(bad)?,
            "model.hidden_dim" => self.train.hidden_dim = num(v).map_err(bad)?,
            "train.lr" => self.train.learning_rate = num(v).map_err(bad)?,
            "train.dropout" => self.train.dropout_prob = num(v).map_err(bad)?,
            "train.max_epochs" => self.train.max_epochs = num(v).map_err(bad)?,
            "train.patience" => self.train.patience = num(v).map_err(bad)?,
            "train.lambda_pp" => self.train.lambda_pp = num(v).map_err(bad)?,
            "train.batch_size" => self.train.batch_size = num(v).map_err(bad)?,
            "split.ratios" => {
                let r = list(v, |s| s.parse::<f64>()).map_err(bad)?;
                self.split = r.try_into().map_err(|_| SetError::Bad("expected three ratios".into()))?;
            }
            "seed" => self.seed = Some(num(v).map_err(bad)?),
            "report.timings" => self.report_timings = parse_bool(v).map_err(bad)?,
            "trace.repair" => {
                self.repair = match v.to_ascii_lowercase().as_str() {
                    "clamp" => RepairPolicy::Clamp,
                    "drop" => RepairPolicy::DropRows,
                    _ => return Err(SetError::Bad("expected clamp or drop".into())),
                }
            }
            "grid.seq_lens" => self.grid.seq_lens = list(v, |s| s.parse::<usize>()).map_err(bad)?,
            "grid.hidden_dims" => self.grid.hidden_dims = list(v, |s| s.parse::<usize>()).map_err(bad)?,
            "grid.lrs" => self.grid.learning_rates = list(v, |s| s.parse::<f64>()).map_err(bad)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: String| ConfigError::Invalid(e);
        self.a3.validate().map_err(|e| inv(e.to_string()))?;
        self.thresholds.validate().map_err(|e| inv(e.to_string()))?;
        self.train.validate().map_err(|e| inv(e.to_string()))?;
        if self.seq_len < 2 {
            return Err(inv(format!("feat.seq_len must be at least 2, got {}", self.seq_len)));
        }
        if self.split.iter().any(|r| !(*r >= 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(inv(format!("split.ratios {:?} must be non-negative and sum to 1", self.split)));
        }
        if self.grid.seq_lens.iter().any(|&l| l < 2) || self.grid.hidden_dims.contains(&0) {
            return Err(inv("grid sequence lengths must be >= 2 and hidden dims >= 1".into()));
        }
        if self.grid.learning_rates.iter().any(|lr| !(*lr > 0.0)) {
            return Err(inv("grid learning rates must be positive".into()));
        }
        if self.kinds.contains(&ModelKind::Transformer) && !self.train.hidden_dim.is_multiple_of(2) {
            return Err(inv("transformer needs an even model.hidden_dim".into()));
        }
        Ok(())
    }

    /// Seed precedence: explicit value, then this config, then `HOSEQ_SEED`,
    /// then [`DEFAULT_SEED`].
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, ConfigError> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    /// Serialises every key; `parse(to_text())` gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("a3.hysteresis_db", self.a3.hysteresis_db.to_string());
        kv("a3.ttt_ms", self.a3.ttt_ms.to_string());
        kv("a3.t_pp_s", self.a3.t_pp_s.to_string());
        let t = &self.thresholds;
        kv("ctrl.tos_th_s", t.tos_th_s.to_string());
        kv("ctrl.rsrp_slope_th", t.rsrp_slope_th_db_s.to_string());
        kv("ctrl.snr_slope_th", t.snr_slope_th_db_s.to_string());
        kv("ctrl.osc_th_s", t.osc_th_s.to_string());
        kv("ctrl.theta_rsrp_dbm", t.theta_rsrp_dbm.to_string());
        kv("ctrl.theta_tos_s", t.theta_tos_s.to_string());
        kv("ctrl.use_pp_head", self.use_pp_head.to_string());
        kv("ctrl.oracle_weights", self.oracle_weights.to_string());
        kv("feat.mode", join(&self.modes.iter().map(|m| m.as_str()).collect::<Vec<_>>()));
        kv("feat.seq_len", self.seq_len.to_string());
        kv("model.kind", join(&self.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>()));
        kv("model.hidden_dim", self.train.hidden_dim.to_string());
        kv("train.lr", self.train.learning_rate.to_string());
        kv("train.dropout", self.train.dropout_prob.to_string());
        kv("train.max_epochs", self.train.max_epochs.to_string());
        kv("train.patience", self.train.patience.to_string());
        kv("train.lambda_pp", self.train.lambda_pp.to_string());
        kv("train.batch_size", self.train.batch_size.to_string());
        kv("split.ratios", join(&self.split));
        if let Some(s) = self.seed {
            kv("seed", s.to_string());
        }
        kv("report.timings", self.report_timings.to_string());
        kv(
            "trace.repair",
            match self.repair {
                RepairPolicy::Clamp => "clamp".into(),
                RepairPolicy::DropRows => "drop".into(),
            },
        );
        kv("grid.seq_lens", join(&self.grid.seq_lens));
        kv("grid.hidden_dims", join(&self.grid.hidden_dims));
        kv("grid.lrs", join(&self.grid.learning_rates));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetError {
    Unknown,
    Bad(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig { seed: Some(3), ..Default::default() };
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_comments_and_lists() {
        let c = RunConfig::parse("# run\nfeat.mode = both  # two blocks\nmodel.kind = gru, lstm\n\nsplit.ratios = 0.6,0.2,0.2\n")
            .unwrap();
        assert_eq!(c.modes, vec![FeatureMode::RsrpOnly, FeatureMode::All]);
        assert_eq!(c.kinds, vec![ModelKind::Gru, ModelKind::Lstm]);
        assert_eq!(c.split, [0.6, 0.2, 0.2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("nope = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse("a3.ttt_ms"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(RunConfig::parse("\ntrain.lr = abc"), Err(ConfigError::BadValue { line: 2, .. })));
        assert!(matches!(RunConfig::parse("train.lr = -0.1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("split.ratios = 0.5,0.5,0.5"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn seed_precedence() {
        let c = RunConfig { seed: Some(5), ..Default::default() };
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), 9);
        assert_eq!(c.resolve_seed(None).unwrap(), 5);
    }
}
