//! Builds trigger windows for both feature modes and shows scaling and class
//! weights.

use hoseq::a3::{baseline_log, A3Params};
use hoseq::features::{apply_minmax, build_windows, chronological_split, class_weights, fit_minmax, FeatureMode};
use hoseq::sim::{generate_scenario, sample_trace, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = sample_trace(&generate_scenario(Preset::CorridorOscillation, 7), 7)?;
    let log = baseline_log(&trace, &A3Params::default())?;
    for mode in [FeatureMode::RsrpOnly, FeatureMode::All] {
        let set = build_windows(&trace, &log, mode, 10);
        let (train, val, test) = chronological_split(&set.windows, [0.7, 0.15, 0.15])?;
        let spec = fit_minmax(&train, mode)?;
        let scaled = apply_minmax(&spec, &train)?;
        let labels: Vec<bool> = train.iter().filter(|w| !w.censored).map(|w| w.target_pp).collect();
        let w = class_weights(&labels)?;
        println!(
            "{mode}: {} features, windows {}/{}/{}, class weights {:.3}/{:.3}",
            mode.feature_count(),
            train.len(),
            val.len(),
            test.len(),
            w.get(false),
            w.get(true)
        );
        let first = &scaled[0];
        println!("  last row of first window ({} -> {}):", first.context.source_cell_id, first.context.target_cell_id);
        for (name, v) in mode.feature_names().iter().zip(first.features.last().expect("non-empty window")) {
            println!("    {name:<20} {v:.3}");
        }
    }
    Ok(())
}
