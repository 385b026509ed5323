//! A small hyper-parameter sweep over sequence length and hidden size.

use hoseq::a3::{baseline_log, A3Params};
use hoseq::features::{apply_minmax, build_windows, chronological_split, fit_minmax, FeatureMode};
use hoseq::models::{grid_search, GridSpace, ModelKind, TrainConfig};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = sample_trace(&generate_scenario(Preset::CorridorOscillation, 7), 7)?;
    let log = baseline_log(&trace, &A3Params::default())?;
    let mode = FeatureMode::All;
    let data = |seq_len: usize| {
        let set = build_windows(&trace, &log, mode, seq_len);
        let (tr, va, _) = chronological_split(&set.windows, [0.7, 0.15, 0.15]).map_err(|e| e.to_string())?;
        let spec = fit_minmax(&tr, mode).map_err(|e| e.to_string())?;
        Ok((apply_minmax(&spec, &tr).map_err(|e| e.to_string())?, apply_minmax(&spec, &va).map_err(|e| e.to_string())?))
    };
    let space = GridSpace { seq_lens: vec![5, 10], hidden_dims: vec![8, 16], learning_rates: vec![3e-3] };
    let base = TrainConfig { max_epochs: 30, seed: 7, ..TrainConfig::default() };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = grid_search(&[ModelKind::Gru, ModelKind::Lstm], &space, &base, data, jobs)?;
    print!("{}", result.to_csv());
    if let Some(best) = result.best_row() {
        println!("\nbest: {} L={} H={} lr={}", best.kind, best.seq_len, best.hidden_dim, best.learning_rate);
    }
    Ok(())
}
