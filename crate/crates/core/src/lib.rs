//! Handover simulation and evaluation toolkit.
//!
//! The crate covers the whole loop: synthetic drive traces ([`sim`]) or
//! ingested ones ([`trace`]), the event-A3 baseline ([`a3`]), sequence
//! windows ([`features`]), GRU/LSTM/Transformer predictors ([`models`]),
//! ping-pong detection and avoidance with counterfactual replay
//! ([`control`]), metrics and reports ([`metrics`]), and the batch driver
//! ([`config`], [`pipeline`], [`commands`]).

// `!(x > 0.0)` is how NaN gets rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a3;
pub mod commands;
pub mod config;
pub mod control;
pub mod features;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod sim;
pub mod trace;

use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace: {0}")]
    Trace(#[from] trace::TraceError),
    #[error("sim: {0}")]
    Sim(#[from] sim::SimError),
    #[error("a3: {0}")]
    A3(#[from] a3::A3Error),
    #[error("features: {0}")]
    Feature(#[from] features::FeatureError),
    #[error("models: {0}")]
    Model(#[from] models::ModelError),
    #[error("control: {0}")]
    Control(#[from] control::ControlError),
    #[error("metrics: {0}")]
    Metrics(#[from] metrics::MetricsError),
    #[error("config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("io: {path}: {reason}")]
    Io { path: String, reason: String },
}
