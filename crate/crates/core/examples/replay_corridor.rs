//! Trains a GRU per feature mode on the corridor preset and replays the
//! held-out tail with avoidance.

use hoseq::config::RunConfig;
use hoseq::features::FeatureMode;
use hoseq::models::ModelKind;
use hoseq::pipeline::{prepare_trace, run_experiment};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;
    let raw = sample_trace(&generate_scenario(Preset::CorridorOscillation, seed), seed)?;
    let cfg = RunConfig::default();
    let (trace, _) = prepare_trace(&raw, cfg.repair)?;
    for mode in [FeatureMode::RsrpOnly, FeatureMode::All] {
        let e = run_experiment(&trace, &cfg, seed, ModelKind::Gru, mode)?;
        let r = &e.reductions;
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.1}%"));
        println!(
            "{mode:<4} handovers {} -> {}  ping-pongs {} -> {}  | pp reduction {}  ho reduction {:.1}%  stay gain {}",
            r.baseline_handovers,
            r.replayed_handovers,
            r.baseline_pp,
            r.replayed_pp,
            fmt(r.pp_reduction_pct),
            r.ho_reduction_pct,
            fmt(r.tos_gain_pct)
        );
        let suppressed = e.replay.decisions.iter().filter(|d| d.decision == hoseq::a3::TriggerDecision::Suppress).count();
        println!("     {} triggers seen, {suppressed} suppressed", e.replay.decisions.len());
    }
    Ok(())
}
